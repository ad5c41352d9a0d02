use crate::real::Real;

/// Result of alpha-compositing one ray.
#[derive(Clone, Debug, PartialEq)]
pub struct Composite<T> {
    pub color: [T; 3],
    pub alpha: T,
    /// `T_i (1 - exp(-sigma_i delta_i))` per sample.
    pub weights: Vec<T>,
    /// Transmittance after each sample, `T_{i+1}`.
    pub transmittance: Vec<T>,
}

/// Front-to-back compositing with `T_i = exp(-sum_{j<i} sigma_j delta_j)`.
pub fn composite_ray<T: Real>(sigma: &[T], color: &[[T; 3]], delta: &[T]) -> Composite<T> {
    assert!(sigma.len() == color.len() && sigma.len() == delta.len(), "matched sample arrays");
    let mut out = [T::zero(); 3];
    let mut weights = Vec::with_capacity(sigma.len());
    let mut trans = Vec::with_capacity(sigma.len());
    let mut optical = T::zero();
    let mut t_prev = T::one();
    for i in 0..sigma.len() {
        optical += sigma[i] * delta[i];
        let t_next = (-optical).exp();
        let w = t_prev - t_next;
        for c in 0..3 {
            out[c] += w * color[i][c];
        }
        weights.push(w);
        trans.push(t_next);
        t_prev = t_next;
    }
    Composite {
        color: out,
        alpha: T::one() - t_prev,
        weights,
        transmittance: trans,
    }
}

/// Gradients of a loss with respect to densities and colors, given its
/// gradients with respect to the composited color and alpha.
pub fn composite_backward<T: Real>(
    comp: &Composite<T>,
    color: &[[T; 3]],
    delta: &[T],
    d_color: [T; 3],
    d_alpha: T,
) -> (Vec<T>, Vec<[T; 3]>) {
    let n = comp.weights.len();
    let mut d_sigma = vec![T::zero(); n];
    let mut d_c = vec![[T::zero(); 3]; n];
    let g: Vec<T> = (0..n)
        .map(|i| d_color[0] * color[i][0] + d_color[1] * color[i][1] + d_color[2] * color[i][2] + d_alpha)
        .collect();
    // suffix = sum_{i>k} w_i g_i
    let mut suffix = T::zero();
    for k in (0..n).rev() {
        d_sigma[k] = delta[k] * (comp.transmittance[k] * g[k] - suffix);
        suffix += comp.weights[k] * g[k];
        for c in 0..3 {
            d_c[k][c] = comp.weights[k] * d_color[c];
        }
    }
    (d_sigma, d_c)
}
