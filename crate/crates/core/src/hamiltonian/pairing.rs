use nalgebra::DMatrix;

use super::SpinIntegralSet;

/// Reduced-BCS pairing model: doubly degenerate levels `ε_k = k·spacing`
/// (`k = 0..n_levels`) and `−g Σ_pq P†_p P_q` with `P†_p = a†_{pα} a†_{pβ}`.
/// The sum includes `p = q`, so a paired level is lowered by `g`.
pub fn model_pairing(n_levels: usize, spacing: f64, g: f64) -> SpinIntegralSet {
    assert!(n_levels >= 1, "the pairing model needs at least one level");
    let n = 2 * n_levels;
    let h = DMatrix::from_fn(n, n, |p, q| if p == q { (p / 2) as f64 * spacing } else { 0.0 });
    let mut s = SpinIntegralSet::new(n, 0.0, h);
    if g != 0.0 {
        for p in 0..n_levels {
            for q in 0..n_levels {
                s.set_v(2 * p, 2 * p + 1, 2 * q, 2 * q + 1, -g);
            }
        }
    }
    s
}
