//! Derivative-free minimization: a box-constrained Nelder–Mead simplex.
//!
//! Trial points are projected onto the box before evaluation, so the
//! objective is never called outside it. Infinite bounds leave a coordinate
//! free. Non-finite objective values are treated as `+inf`, which lets
//! callers encode hard constraints (support violations, invalid scales)
//! by returning `f64::INFINITY`.

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMead {
    pub max_evals: usize,
    /// Relative spread of simplex values at which a run stops.
    pub ftol: f64,
    /// Maximum coordinate distance between simplex vertices at which a run stops.
    pub xtol: f64,
    /// Extra runs restarted from the best vertex after convergence.
    pub restarts: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            max_evals: 4000,
            ftol: 1e-12,
            xtol: 1e-9,
            restarts: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

impl NelderMead {
    /// Minimize `f` from `x0` with an initial simplex of per-coordinate `step`.
    ///
    /// `bounds`, when given, must have one `(lo, hi)` pair per coordinate.
    pub fn minimize<F>(
        &self,
        mut f: F,
        x0: &[f64],
        step: &[f64],
        bounds: Option<&[(f64, f64)]>,
    ) -> Minimum
    where
        F: FnMut(&[f64]) -> f64,
    {
        assert_eq!(x0.len(), step.len());
        if let Some(b) = bounds {
            assert_eq!(b.len(), x0.len());
        }
        let mut evals = 0usize;
        let mut eval = |x: &[f64], evals: &mut usize| {
            *evals += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };

        let mut start = project(x0, bounds);
        let mut scale: Vec<f64> = step.to_vec();
        let mut best = Minimum {
            value: eval(&start, &mut evals),
            x: start.clone(),
            evals,
            converged: false,
        };

        for round in 0..=self.restarts {
            let (x, value, converged) = self.run(&mut eval, &start, &scale, bounds, &mut evals);
            let improved = value < best.value;
            let gain = best.value - value;
            if value <= best.value {
                best.x = x;
                best.value = value;
            }
            best.converged = converged;
            best.evals = evals;
            if !converged || evals >= self.max_evals {
                break;
            }
            // A restart that no longer moves the optimum ends the search.
            if round > 0 && (!improved || gain <= self.ftol * (best.value.abs() + self.ftol)) {
                break;
            }
            start = best.x.clone();
            scale.iter_mut().for_each(|s| *s *= 0.5);
        }
        best
    }

    fn run<E>(
        &self,
        eval: &mut E,
        x0: &[f64],
        step: &[f64],
        bounds: Option<&[(f64, f64)]>,
        evals: &mut usize,
    ) -> (Vec<f64>, f64, bool)
    where
        E: FnMut(&[f64], &mut usize) -> f64,
    {
        let n = x0.len();
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        let p0 = project(x0, bounds);
        let v0 = eval(&p0, evals);
        simplex.push((p0, v0));
        for i in 0..n {
            let mut p = x0.to_vec();
            p[i] += step[i];
            // Step inward when the outward vertex would collapse onto a bound.
            if let Some(b) = bounds {
                if p[i] > b[i].1 {
                    p[i] = x0[i] - step[i];
                }
            }
            let p = project(&p, bounds);
            let v = eval(&p, evals);
            simplex.push((p, v));
        }

        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let best = simplex[0].1;
            let worst = simplex[n].1;
            let spread = if best.is_finite() && worst.is_finite() {
                (worst - best).abs()
            } else {
                f64::INFINITY
            };
            let diameter = simplex[1..]
                .iter()
                .flat_map(|(p, _)| p.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            let flat = spread <= self.ftol * (best.abs() + self.ftol);
            if best.is_finite() && (flat && diameter <= self.xtol || diameter == 0.0) {
                return (simplex[0].0.clone(), best, true);
            }
            if *evals >= self.max_evals {
                return (simplex[0].0.clone(), best, false);
            }

            let centroid: Vec<f64> = (0..n)
                .map(|j| simplex[..n].iter().map(|(p, _)| p[j]).sum::<f64>() / n as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                let x: Vec<f64> = centroid
                    .iter()
                    .zip(&simplex[n].0)
                    .map(|(c, w)| c + t * (c - w))
                    .collect();
                project(&x, bounds)
            };

            let xr = along(REFLECT);
            let fr = eval(&xr, evals);
            if fr < simplex[0].1 {
                let xe = along(REFLECT * EXPAND);
                let fe = eval(&xe, evals);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
                continue;
            }
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = along(REFLECT * CONTRACT);
                let fc = eval(&xc, evals);
                (xc, fc)
            } else {
                let xc = along(-CONTRACT);
                let fc = eval(&xc, evals);
                (xc, fc)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
                continue;
            }
            let anchor = simplex[0].0.clone();
            for vertex in simplex.iter_mut().skip(1) {
                let p: Vec<f64> = anchor
                    .iter()
                    .zip(&vertex.0)
                    .map(|(a, x)| a + SHRINK * (x - a))
                    .collect();
                let p = project(&p, bounds);
                let v = eval(&p, evals);
                *vertex = (p, v);
            }
        }
    }
}

fn project(x: &[f64], bounds: Option<&[(f64, f64)]>) -> Vec<f64> {
    match bounds {
        None => x.to_vec(),
        Some(b) => x
            .iter()
            .zip(b)
            .map(|(&v, &(lo, hi))| v.clamp(lo, hi))
            .collect(),
    }
}
