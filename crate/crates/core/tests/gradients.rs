mod gradcheck;

macro_rules! within_tolerance {
    ($($case:ident),* $(,)?) => {
        $(
            #[test]
            fn $case() {
                let err = gradcheck::$case();
                assert!(err < gradcheck::TOL, "relative error {err:e}");
            }
        )*
    };
}

within_tolerance!(
    conv2d_case,
    conv_transpose2d_case,
    batchnorm_training,
    batchnorm_inference,
    elementwise_ops,
    layout_ops,
    composed_block,
    focal_term,
    regression_term,
    combined_loss_through_tape,
);
