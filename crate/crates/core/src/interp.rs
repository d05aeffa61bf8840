//! Barycentric Lagrange interpolation on arbitrary distinct nodes.

/// Barycentric weights `w_j = 1 / prod_{k != j} (x_j - x_k)`.
pub fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut w = vec![1.0; n];
    for j in 0..n {
        for k in 0..n {
            if k != j {
                w[j] *= nodes[j] - nodes[k];
            }
        }
        w[j] = 1.0 / w[j];
    }
    w
}

/// Lagrange basis values `l_j(x)` written into `out`.
///
/// Uses the second barycentric form, which reproduces constants exactly up to
/// rounding. If `x` coincides with a node the result is the unit vector.
pub fn lagrange_basis_into(nodes: &[f64], x: f64, out: &mut [f64]) {
    debug_assert_eq!(nodes.len(), out.len());
    let w = barycentric_weights(nodes);
    lagrange_basis_with(nodes, &w, x, out);
}

pub fn lagrange_basis_with(nodes: &[f64], w: &[f64], x: f64, out: &mut [f64]) {
    if let Some(hit) = nodes.iter().position(|&xn| xn == x) {
        out.iter_mut().for_each(|o| *o = 0.0);
        out[hit] = 1.0;
        return;
    }
    let mut denom = 0.0;
    for j in 0..nodes.len() {
        let t = w[j] / (x - nodes[j]);
        out[j] = t;
        denom += t;
    }
    for o in out.iter_mut() {
        *o /= denom;
    }
}

pub fn lagrange_basis(nodes: &[f64], x: f64) -> Vec<f64> {
    let mut out = vec![0.0; nodes.len()];
    lagrange_basis_into(nodes, x, &mut out);
    out
}

/// Interpolating polynomial through `(nodes, values)` evaluated at `x`.
pub fn interpolate(nodes: &[f64], values: &[f64], x: f64) -> f64 {
    lagrange_basis(nodes, x)
        .iter()
        .zip(values)
        .map(|(l, v)| l * v)
        .sum()
}
