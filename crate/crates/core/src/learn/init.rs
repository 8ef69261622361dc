//! Standard starting point for split-step equalizers: segments carrying
//! equal nonlinear phase, one nonlinear step per segment placed at the
//! segment's effective-length midpoint.

/// Forward position where the accumulated effective length reaches fraction
/// `q` of the span's effective length.
fn effective_quantile(q: f64, alpha: f64, length_km: f64) -> f64 {
    if alpha * length_km < 1e-12 {
        return q * length_km;
    }
    -(q * (-alpha * length_km).exp_m1()).ln_1p() / alpha
}

/// Segment boundaries `z_0 = 0 < z_1 < ... < z_Ns = L` solving
/// `1 - exp(-alpha z_k) = (k / Ns) (1 - exp(-alpha L))`.
pub fn segment_boundaries(length_km: f64, alpha_per_km: f64, num_steps: usize) -> Vec<f64> {
    let mut z: Vec<f64> = (0..=num_steps)
        .map(|k| effective_quantile(k as f64 / num_steps as f64, alpha_per_km, length_km))
        .collect();
    z[num_steps] = length_km;
    z
}

/// Forward positions of the nonlinear points, one per segment.
pub fn nonlinear_points(length_km: f64, alpha_per_km: f64, num_steps: usize) -> Vec<f64> {
    (0..num_steps)
        .map(|k| effective_quantile((k as f64 + 0.5) / num_steps as f64, alpha_per_km, length_km))
        .collect()
}

/// Backward dispersion lengths `L_0 ..= L_Ns`, receiver end first.
///
/// `L_0` runs from the fiber output to the last nonlinear point, interior
/// lengths separate consecutive points and `L_Ns` reaches the fiber input.
pub fn init_lengths(length_km: f64, alpha_per_km: f64, num_steps: usize) -> Vec<f64> {
    assert!(num_steps >= 1, "at least one step");
    let points = nonlinear_points(length_km, alpha_per_km, num_steps);
    let mut lengths = Vec::with_capacity(num_steps + 1);
    let mut at = length_km;
    for &p in points.iter().rev() {
        lengths.push(at - p);
        at = p;
    }
    lengths.push(at);
    let partial: f64 = lengths[..num_steps].iter().sum();
    lengths[num_steps] = length_km - partial;
    lengths
}

/// Effective length of every segment in backward step order. Amplification
/// restores the launch power, so the receiver plane needs no extra scaling.
pub fn segment_effective_lengths(length_km: f64, alpha_per_km: f64, num_steps: usize) -> Vec<f64> {
    let z = segment_boundaries(length_km, alpha_per_km, num_steps);
    let mut out: Vec<f64> = z
        .windows(2)
        .map(|w| {
            if alpha_per_km * length_km < 1e-12 {
                w[1] - w[0]
            } else {
                -(-alpha_per_km * (w[1] - w[0])).exp_m1() * (-alpha_per_km * w[0]).exp() / alpha_per_km
            }
        })
        .collect();
    out.reverse();
    out
}

/// Single-tap filters `c_i[0] = -gamma L_eff,i` counteracting the channel's
/// self-phase modulation.
pub fn init_coeffs(filter_halflen: usize, gamma_per_w_km: f64, eff_lengths_km: &[f64]) -> Vec<Vec<f64>> {
    eff_lengths_km
        .iter()
        .map(|&l| {
            let mut c = vec![0.0; filter_halflen + 1];
            c[0] = -gamma_per_w_km * l;
            c
        })
        .collect()
}
