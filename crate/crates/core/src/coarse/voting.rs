//! Exact one-dimensional truncated-least-squares solver (adaptive voting).
//!
//! Minimizes `f(x) = Σᵢ wᵢ · min((x − vᵢ)² / bᵢ², c²)`. Each term is quadratic
//! on the closed interval `[vᵢ − c·bᵢ, vᵢ + c·bᵢ]` and constant outside, so `f`
//! is piecewise quadratic between consecutive interval endpoints. The minimum
//! over each elementary piece is the weighted mean of the active measurements
//! clamped into the piece; the best piece gives the global minimum.

/// One scalar measurement with its noise bound and weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub value: f64,
    pub bound: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TlsSolution {
    /// Returned estimate: the global minimizer, or the weighted median when
    /// no two measurement intervals overlap.
    pub estimate: f64,
    /// Exact global minimizer of the truncated objective.
    pub minimizer: f64,
    /// Objective value at `minimizer`.
    pub objective: f64,
    /// Measurements whose interval contains `minimizer`.
    pub consensus: Vec<usize>,
    /// Set when every interval is disjoint from all others.
    pub no_consensus: bool,
}

/// Truncated objective at `x`.
pub fn tls_objective(measurements: &[Measurement], c2: f64, x: f64) -> f64 {
    measurements.iter().map(|m| m.weight * ((x - m.value).powi(2) / (m.bound * m.bound)).min(c2)).sum()
}

/// Lower weighted median of the values.
pub fn weighted_median(measurements: &[Measurement]) -> f64 {
    let mut order: Vec<usize> = (0..measurements.len()).collect();
    order.sort_by(|&a, &b| measurements[a].value.total_cmp(&measurements[b].value));
    let total: f64 = measurements.iter().map(|m| m.weight).sum();
    let mut acc = 0.0;
    for &i in &order {
        acc += measurements[i].weight;
        if acc >= 0.5 * total {
            return measurements[i].value;
        }
    }
    measurements[*order.last().expect("non-empty")].value
}

struct Candidate {
    x: f64,
    approx: f64,
    variance: f64,
}

/// Solves the 1-D TLS problem exactly. Panics on an empty slice.
pub fn solve_tls_1d(measurements: &[Measurement], c2: f64) -> TlsSolution {
    assert!(!measurements.is_empty(), "TLS voting needs at least one measurement");
    let c = c2.sqrt();
    // (position, is_exit, index); entries sort before exits at equal positions (closed intervals)
    let mut events: Vec<(f64, bool, usize)> = Vec::with_capacity(2 * measurements.len());
    for (i, m) in measurements.iter().enumerate() {
        let h = c * m.bound;
        events.push((m.value - h, false, i));
        events.push((m.value + h, true, i));
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let total_weight: f64 = measurements.iter().map(|m| m.weight).sum();
    let (mut sw, mut swv, mut swvv, mut active_weight) = (0.0, 0.0, 0.0, 0.0);
    let mut active = 0usize;
    let mut max_active = 0usize;
    let mut candidates: Vec<Candidate> = Vec::new();
    for k in 0..events.len() {
        let (_, exit, i) = events[k];
        let m = &measurements[i];
        let inv = m.weight / (m.bound * m.bound);
        let sign = if exit { -1.0 } else { 1.0 };
        sw += sign * inv;
        swv += sign * inv * m.value;
        swvv += sign * inv * m.value * m.value;
        active_weight += sign * m.weight;
        if exit {
            active -= 1;
        } else {
            active += 1;
        }
        max_active = max_active.max(active);
        if active == 0 || k + 1 == events.len() || !(sw > 0.0) {
            continue;
        }
        let (lo, hi) = (events[k].0, events[k + 1].0);
        let mean = swv / sw;
        let x = mean.clamp(lo, hi);
        let outside = c2 * (total_weight - active_weight).max(0.0);
        let approx = sw * x * x - 2.0 * swv * x + swvv + outside;
        let variance = ((swvv - swv * swv / sw) / sw).max(0.0);
        candidates.push(Candidate { x, approx, variance });
    }
    if candidates.is_empty() {
        // degenerate bounds; fall back to evaluating at each measurement
        candidates = measurements.iter().map(|m| Candidate { x: m.value, approx: 0.0, variance: 0.0 }).collect();
    }

    // re-evaluate the most promising pieces exactly
    candidates.sort_by(|a, b| a.approx.total_cmp(&b.approx));
    let best_approx = candidates[0].approx;
    let slack = 1e-6 * (1.0 + best_approx.abs());
    let mut best: Option<(f64, f64, f64)> = None;
    for cand in candidates.iter().enumerate().take_while(|(i, c)| *i < 8 || c.approx <= best_approx + slack).take(64).map(|(_, c)| c) {
        let f = tls_objective(measurements, c2, cand.x);
        let better = match best {
            None => true,
            Some((bf, bx, bv)) => {
                let tol = 1e-12 * (1.0 + bf.abs());
                f < bf - tol || ((f - bf).abs() <= tol && (cand.variance < bv || (cand.variance == bv && cand.x < bx)))
            }
        };
        if better {
            best = Some((f, cand.x, cand.variance));
        }
    }
    let (objective, minimizer, _) = best.expect("at least one candidate");
    let consensus: Vec<usize> =
        measurements.iter().enumerate().filter(|(_, m)| (minimizer - m.value).abs() <= c * m.bound).map(|(i, _)| i).collect();
    let no_consensus = measurements.len() >= 2 && max_active <= 1;
    let estimate = if no_consensus { weighted_median(measurements) } else { minimizer };
    TlsSolution { estimate, minimizer, objective, consensus, no_consensus }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn meas(values: &[f64], bound: f64) -> Vec<Measurement> {
        values.iter().map(|&v| Measurement { value: v, bound, weight: 1.0 }).collect()
    }

    #[test]
    fn unanimous_measurements() {
        let s = solve_tls_1d(&meas(&[2.0; 10], 0.1), 1.0);
        assert_eq!(s.estimate, 2.0);
        assert_eq!(s.consensus.len(), 10);
        assert!(!s.no_consensus);
    }

    #[test]
    fn single_measurement_is_exact() {
        let s = solve_tls_1d(&meas(&[-3.25], 0.5), 1.0);
        assert_eq!(s.estimate, -3.25);
        assert_eq!(s.objective, 0.0);
    }

    #[test]
    fn disjoint_intervals_fall_back_to_weighted_median() {
        let m = vec![
            Measurement { value: 0.0, bound: 0.1, weight: 1.0 },
            Measurement { value: 5.0, bound: 0.1, weight: 3.0 },
            Measurement { value: 10.0, bound: 0.1, weight: 1.0 },
        ];
        let s = solve_tls_1d(&m, 1.0);
        assert!(s.no_consensus);
        assert_eq!(s.estimate, 5.0);
    }

    #[test]
    fn matches_dense_grid_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.random_range(1..=12);
            let m: Vec<Measurement> = (0..n)
                .map(|_| Measurement {
                    value: rng.random_range(-5.0..5.0),
                    bound: rng.random_range(0.2..2.0),
                    weight: rng.random_range(0.1..3.0),
                })
                .collect();
            let s = solve_tls_1d(&m, 1.0);
            let grid_min = (0..=40_000).map(|k| tls_objective(&m, 1.0, -10.0 + 20.0 * k as f64 / 40_000.0)).fold(f64::INFINITY, f64::min);
            assert!(s.objective <= grid_min + 1e-9, "{} > {}", s.objective, grid_min);
        }
    }
}
