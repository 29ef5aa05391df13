#[allow(dead_code)]
mod support;

use support::invariants as inv;

macro_rules! checks {
    ($($name:ident),* $(,)?) => {
        $(
            #[test]
            fn $name() {
                if let Err(e) = inv::$name() {
                    panic!("{e}");
                }
            }
        )*
    };
}

checks!(
    precoding_equivalence,
    jammer_constant_modulus,
    code_orthonormality,
    scenario_determinism,
    received_is_sum_of_parts,
    clean_mixture_ignores_channel_phase,
    rdd_positive_scale_invariance,
    qpsk_quadrant_equivalence,
    mfb_linearity,
    orthonormal_clean_exactness,
    bn_training_normalizes,
    adam_zero_gradient_is_noop,
    model_round_trip,
    dataset_round_trip,
    shape_preservation,
    input_tensor_is_peak_normalized,
    rates_bounded_and_exact,
    sweep_csv_reproducible,
);
