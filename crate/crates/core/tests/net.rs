use polarfuse_core::net::{
    checkpoint_bytes, load_checkpoint, model_from_bytes, save_checkpoint, Model, NetworkConfig, SWAP_CHANNELS_WIDTH,
};
use polarfuse_core::tensor::permute_axes;
use polarfuse_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_inputs(cfg: &NetworkConfig, n: usize, seed: u64) -> (Tensor<f32>, Tensor<f32>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [ch, cw] = cfg.camera_input;
    let [rr, rd] = cfg.radar_input;
    let cam = Tensor::from_fn(&[n, 3, ch, cw], |_| rng.random_range(0.0..1.0));
    let rad = Tensor::from_fn(&[n, cfg.radar_channels(), rr, rd], |_| rng.random_range(-1.0..1.0));
    (cam, rad)
}

#[test]
fn full_parameter_count_in_range() {
    let m = Model::new(&NetworkConfig::full()).unwrap();
    let n = m.count_parameters();
    assert!((4_000_000..=9_000_000).contains(&n), "{n}");
    assert_eq!(Model::new(&NetworkConfig::full()).unwrap().count_parameters(), n);
    let parts: usize = Model::SUBMODULES.iter().map(|s| m.submodule_size(s)).sum();
    assert_eq!(parts, n);
}

#[test]
fn desk_stage_shapes() {
    let cfg = NetworkConfig::desk();
    let m = Model::new(&cfg).unwrap();
    let (cam, rad) = random_inputs(&cfg, 2, 1);
    let mut f = m.forward_context(false);
    let feats = m.camera_encoder_forward(&mut f, cam).unwrap();
    let spatial: Vec<_> = feats.iter().map(|&v| f.value(v).shape()[2..].to_vec()).collect();
    assert_eq!(spatial, vec![vec![64, 32], vec![32, 16], vec![16, 8], vec![8, 4], vec![4, 2]]);
    assert_eq!(f.value(feats[4]).shape()[1], 16);
    let cam_feat = m.camera_decoder_forward(&mut f, &feats).unwrap();
    assert_eq!(f.value(cam_feat).shape(), &[2, 16, 16, 28]);
    let rad_feat = m.radar_branch_forward(&mut f, rad).unwrap();
    assert_eq!(f.value(rad_feat).shape(), &[2, 16, 16, 28]);
    let out = m.fuse_and_detect(&mut f, cam_feat, rad_feat).unwrap();
    assert_eq!(f.value(out.cls).shape(), &[2, 1, 16, 28]);
    assert_eq!(f.value(out.reg).shape(), &[2, 2, 16, 28]);
    assert!(f.value(out.cls).data().iter().all(|&p| p > 0.0 && p < 1.0));
}

#[test]
fn zero_inputs_stay_finite_and_radar_only_works() {
    let cfg = NetworkConfig::desk();
    let m = Model::new(&cfg).unwrap();
    let (cam, rad) = random_inputs(&cfg, 1, 2);
    let zero_cam = cam.map(|_| 0.0);
    let zero_rad = rad.map(|_| 0.0);
    for train in [false, true] {
        let mut f = m.forward_context(train);
        let out = m.forward(&mut f, zero_cam.clone(), zero_rad.clone()).unwrap();
        assert!(f.value(out.cls).is_finite() && f.value(out.reg).is_finite());
    }
    let mut f = m.forward_context(false);
    let rad_feat = m.radar_branch_forward(&mut f, rad).unwrap();
    let zeros = f.input(Tensor::zeros(f.value(rad_feat).shape()));
    let out = m.fuse_and_detect(&mut f, zeros, rad_feat).unwrap();
    assert_eq!(f.value(out.cls).shape(), &[1, 1, 16, 28]);
}

#[test]
fn same_seed_same_model_and_outputs() {
    let cfg = NetworkConfig::desk();
    let (a, b) = (Model::new(&cfg).unwrap(), Model::new(&cfg).unwrap());
    assert_eq!(a.store(), b.store());
    let other = Model::new(&NetworkConfig { seed: 9, ..cfg.clone() }).unwrap();
    assert_ne!(a.store(), other.store());
    let (cam, rad) = random_inputs(&cfg, 2, 3);
    let pa = a.predict(cam.clone(), rad.clone()).unwrap();
    let pb = b.predict(cam, rad).unwrap();
    assert_eq!(pa, pb);
}

#[test]
fn freezing_subtracts_exactly_the_submodule() {
    let mut m = Model::new(&NetworkConfig::desk()).unwrap();
    let total = m.count_parameters();
    let head = m.submodule_size("head");
    assert!(m.freeze("head") > 0);
    assert_eq!(m.count_parameters(), total - head);
    m.unfreeze("head");
    assert_eq!(m.count_parameters(), total);
}

#[test]
fn swap_expand_swap_is_local_to_the_expanded_axis() {
    // One nonzero azimuth column in, 1×1 expansion in the swapped layout:
    // every (channel, row) pair keeps its own values and only the azimuth
    // axis is mixed.
    let (c, h, w, ga) = (3, 5, 4, 7);
    let mut x = Tensor::<f32>::zeros(&[1, c, h, w]);
    x.set(&[0, 1, 2, 3], 1.5);
    let swapped = permute_axes(&x, &SWAP_CHANNELS_WIDTH).unwrap();
    assert_eq!(swapped.shape(), &[1, w, h, c]);
    let spec = polarfuse_core::ConvSpec::new(w, ga, 1).no_bias();
    let weights = Tensor::from_fn(&spec.weight_shape(), |i| (i[0] * 10 + i[1] + 1) as f32);
    let expanded = polarfuse_core::tensor::conv2d(&swapped, &spec, &weights, None).unwrap();
    let back = permute_axes(&expanded, &SWAP_CHANNELS_WIDTH).unwrap();
    assert_eq!(back.shape(), &[1, c, h, ga]);
    for ch in 0..c {
        for r in 0..h {
            for a in 0..ga {
                let want = if ch == 1 && r == 2 { 1.5 * (a * 10 + 3 + 1) as f32 } else { 0.0 };
                assert_eq!(back.get(&[0, ch, r, a]), want);
            }
        }
    }
    assert_eq!(permute_axes(&swapped, &SWAP_CHANNELS_WIDTH).unwrap(), x);
}

#[test]
fn every_submodule_receives_gradient() {
    let cfg = NetworkConfig::desk();
    let m = Model::new(&cfg).unwrap();
    let (cam, rad) = random_inputs(&cfg, 2, 4);
    let mut f = m.forward_context(true);
    let out = m.forward(&mut f, cam, rad).unwrap();
    // Weighted sum of both heads so every output cell contributes.
    let wc = f.input(Tensor::from_fn(f.value(out.cls).shape(), |i| 1.0 + (i[2] + i[3]) as f32 * 0.01));
    let wr = f.input(Tensor::from_fn(f.value(out.reg).shape(), |i| 0.1 - (i[1] + i[3]) as f32 * 0.003));
    let a = f.graph.mul(out.cls, wc).unwrap();
    let b = f.graph.mul(out.reg, wr).unwrap();
    let (sa, sb) = (f.graph.sum(a).unwrap(), f.graph.sum(b).unwrap());
    let loss = f.graph.add(sa, sb).unwrap();
    let grads = f.graph.backward(loss).unwrap();
    let used = f.used_params();
    for prefix in Model::SUBMODULES {
        let norm: f64 = used
            .iter()
            .filter(|(i, _)| m.store().get(*i).name.starts_with(prefix) && m.store().get(*i).is_optimised())
            .map(|&(_, v)| grads.get(v).data().iter().map(|g| (*g as f64).powi(2)).sum::<f64>())
            .sum();
        assert!(norm > 0.0, "no gradient reaches {prefix}");
    }
    let untouched: Vec<_> = m
        .store()
        .iter()
        .enumerate()
        .filter(|(i, p)| p.is_optimised() && !used.iter().any(|(j, _)| j == i))
        .map(|(_, p)| p.name.clone())
        .collect();
    assert!(untouched.is_empty(), "{untouched:?}");
}

#[test]
fn checkpoint_round_trip_is_byte_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.pfn");
    let m = Model::new(&NetworkConfig { seed: 5, ..NetworkConfig::desk() }).unwrap();
    let size = save_checkpoint(&m, &path).unwrap();
    assert_eq!(size, std::fs::metadata(&path).unwrap().len());
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back.store(), m.store());
    assert_eq!(back.config(), m.config());
    assert_eq!(checkpoint_bytes(&back), std::fs::read(&path).unwrap());
    let bytes = checkpoint_bytes(&m);
    assert!(model_from_bytes(&bytes[..bytes.len() - 3]).unwrap_err().to_string().contains("byte offset"));
    let mut bad = bytes.clone();
    bad[0] = b'Q';
    assert!(model_from_bytes(&bad).is_err());
}
