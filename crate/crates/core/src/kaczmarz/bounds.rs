//! Mean-square-error bounds for RK and tail-averaged RK.
//!
//! Arguments follow one convention: `kappa_dem` is `‖A⁺‖ ‖A‖_F`,
//! `init_err_sq` is `‖x₀ − x⋆‖²`, `pinv_norm_sq` is `‖A⁺‖²`, and
//! `residual_sq` is `‖b − A x⋆‖²`.

#[inline]
fn contraction(kappa_dem: f64) -> f64 {
    1.0 - 1.0 / (kappa_dem * kappa_dem)
}

/// RK: exponential decay down to the horizon `‖A⁺‖² ‖b − A x⋆‖²`.
pub fn bound_theorem1(
    kappa_dem: f64,
    init_err_sq: f64,
    pinv_norm_sq: f64,
    residual_sq: f64,
    t: u64,
) -> f64 {
    contraction(kappa_dem).powf(t as f64) * init_err_sq + pinv_norm_sq * residual_sq
}

/// TARK: bias decaying in the burn-in plus variance decaying as
/// `1/(t − t_b)`.
pub fn bound_theorem2(
    kappa_dem: f64,
    init_err_sq: f64,
    pinv_norm_sq: f64,
    residual_sq: f64,
    t_b: u64,
    t: u64,
) -> f64 {
    assert!(t_b < t, "burn-in must be below the final time");
    let k2 = kappa_dem * kappa_dem;
    contraction(kappa_dem).powf(t_b as f64) * init_err_sq
        + (2.0 * k2 - 1.0) / (t - t_b) as f64 * pinv_norm_sq * residual_sq
}

/// TARK alternative bound, useful for fixed `t_b` and growing `t`.
pub fn bound_theorem3(
    kappa_dem: f64,
    init_err_sq: f64,
    pinv_norm_sq: f64,
    residual_sq: f64,
    t_b: u64,
    t: u64,
) -> f64 {
    assert!(t_b < t, "burn-in must be below the final time");
    let k2 = kappa_dem * kappa_dem;
    let span = (t - t_b) as f64;
    (2.0 * k2 - 1.0) / span
        * (k2 * contraction(kappa_dem).powf(t_b as f64) / span * init_err_sq
            + pinv_norm_sq * residual_sq)
}
