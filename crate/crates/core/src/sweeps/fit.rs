//! Least-squares curve fits by multi-start Nelder-Mead.

use serde::Serialize;

use crate::error::{Error, Result};

/// Minimum number of simplex starts per fit.
pub const MIN_STARTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveFamily {
    /// `a·e^(−b·x)`
    ExpDecay,
    /// `a·x^(−b)`
    PolyDecay,
    /// `a·x/(b + x)`
    Plateau,
    /// `a·x/(b + x) + c`
    PlateauOffset,
}

impl CurveFamily {
    pub const ALL: [CurveFamily; 4] = [
        CurveFamily::ExpDecay,
        CurveFamily::PolyDecay,
        CurveFamily::Plateau,
        CurveFamily::PlateauOffset,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CurveFamily::ExpDecay => "exp_decay",
            CurveFamily::PolyDecay => "poly_decay",
            CurveFamily::Plateau => "plateau",
            CurveFamily::PlateauOffset => "plateau_offset",
        }
    }

    pub fn num_params(self) -> usize {
        match self {
            CurveFamily::PlateauOffset => 3,
            _ => 2,
        }
    }

    fn needs_positive_x(self) -> bool {
        !matches!(self, CurveFamily::ExpDecay)
    }

    /// The shape term multiplying `a`; `b` is the nonlinear parameter.
    fn shape(self, b: f64, x: f64) -> f64 {
        match self {
            CurveFamily::ExpDecay => (-b * x).exp(),
            CurveFamily::PolyDecay => x.powf(-b),
            CurveFamily::Plateau | CurveFamily::PlateauOffset => x / (b + x),
        }
    }

    pub fn eval(self, params: &[f64], x: f64) -> f64 {
        let base = params[0] * self.shape(params[1], x);
        match self {
            CurveFamily::PlateauOffset => base + params[2],
            _ => base,
        }
    }
}

impl std::str::FromStr for CurveFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CurveFamily::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown curve family {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveFit {
    pub family: CurveFamily,
    #[serde(serialize_with = "crate::fmt::ser_vec")]
    pub params: Vec<f64>,
    #[serde(serialize_with = "crate::fmt::ser_f64")]
    pub relative_error: f64,
}

impl CurveFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.family.eval(&self.params, x)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

fn sum_squares(family: CurveFamily, params: &[f64], xs: &[f64], ys: &[f64]) -> f64 {
    let s: f64 = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| (family.eval(params, x) - y).powi(2))
        .sum();
    if s.is_finite() {
        s
    } else {
        f64::INFINITY
    }
}

/// Best linear parameters (`a`, and `c` for the offset family) for a fixed
/// nonlinear parameter `b`.
fn project(family: CurveFamily, b: f64, xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let g: Vec<f64> = xs.iter().map(|&x| family.shape(b, x)).collect();
    if family == CurveFamily::PlateauOffset {
        let k = xs.len() as f64;
        let (sg, sgg) = (g.iter().sum::<f64>(), g.iter().map(|v| v * v).sum::<f64>());
        let sy: f64 = ys.iter().sum();
        let sgy: f64 = g.iter().zip(ys).map(|(a, b)| a * b).sum();
        let det = sgg * k - sg * sg;
        if det.abs() <= 1e-14 * sgg * k {
            return vec![0.0, b, sy / k];
        }
        vec![(sgy * k - sg * sy) / det, b, (sgg * sy - sg * sgy) / det]
    } else {
        let sgg: f64 = g.iter().map(|v| v * v).sum();
        let sgy: f64 = g.iter().zip(ys).map(|(a, b)| a * b).sum();
        let a = if sgg > 0.0 { sgy / sgg } else { 0.0 };
        vec![a, b]
    }
}

/// Starting values for the nonlinear parameter, spread over ranges scaled
/// to the data.
fn nonlinear_starts(family: CurveFamily, xs: &[f64]) -> Vec<f64> {
    let geometric = |lo: f64, hi: f64, k: usize| -> Vec<f64> {
        (0..k)
            .map(|i| lo * (hi / lo).powf(i as f64 / (k - 1) as f64))
            .collect()
    };
    let xmax = xs.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    match family {
        CurveFamily::ExpDecay => {
            let mut b = geometric(1e-3 / xmax, 30.0 / xmax, 12);
            b.extend(geometric(1e-2 / xmax, 3.0 / xmax, 4).into_iter().map(|v| -v));
            b
        }
        CurveFamily::PolyDecay => (0..MIN_STARTS).map(|i| -3.0 + 8.0 * i as f64 / 15.0).collect(),
        CurveFamily::Plateau | CurveFamily::PlateauOffset => {
            let xmin = xs.iter().fold(f64::INFINITY, |m, &x| m.min(x));
            geometric(xmin * 1e-4, xmax * 1e2, MIN_STARTS)
        }
    }
}

/// Plain Nelder-Mead with standard coefficients. Returns the best vertex
/// and its value.
pub fn nelder_mead(
    f: &dyn Fn(&[f64]) -> f64,
    x0: &[f64],
    steps: &[f64],
    max_evals: usize,
    ftol_abs: f64,
) -> (Vec<f64>, f64) {
    let d = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..d {
        let mut v = x0.to_vec();
        v[i] += steps[i];
        simplex.push(v);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut evals = d + 1;
    while evals < max_evals {
        let mut idx: Vec<usize> = (0..=d).collect();
        idx.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        vals = idx.iter().map(|&i| vals[i]).collect();
        let spread = vals[d] - vals[0];
        let diameter = simplex[1..]
            .iter()
            .map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        let xscale = simplex[0].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if (spread.is_finite() && spread <= ftol_abs.max(1e-15 * vals[0].abs())) || diameter <= 1e-14 * (1.0 + xscale) {
            break;
        }
        let centroid: Vec<f64> = (0..d)
            .map(|k| simplex[..d].iter().map(|v| v[k]).sum::<f64>() / d as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[d])
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                simplex[d] = xe;
                vals[d] = fe;
            } else {
                simplex[d] = xr;
                vals[d] = fr;
            }
        } else if fr < vals[d - 1] {
            simplex[d] = xr;
            vals[d] = fr;
        } else {
            let (xc, fc) = if fr < vals[d] {
                let xc = along(-0.5);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = f(&xc);
                (xc, fc)
            };
            evals += 1;
            if fc < vals[d].min(fr) {
                simplex[d] = xc;
                vals[d] = fc;
            } else {
                let best = simplex[0].clone();
                for i in 1..=d {
                    for k in 0..d {
                        simplex[i][k] = best[k] + 0.5 * (simplex[i][k] - best[k]);
                    }
                    vals[i] = f(&simplex[i]);
                }
                evals += d;
            }
        }
    }
    let best = (0..=d).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap();
    (simplex[best].clone(), vals[best])
}

fn initial_steps(p: &[f64]) -> Vec<f64> {
    p.iter().map(|v| 0.1 * v.abs() + 1e-3).collect()
}

/// Fit `family` to `(xs, ys)` in the least-squares sense. The relative
/// error is `‖fit − ys‖₂ / ‖ys‖₂`.
pub fn fit_curve(family: CurveFamily, xs: &[f64], ys: &[f64]) -> Result<CurveFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            context: "curve fit data",
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < family.num_params() {
        return Err(Error::invalid(format!(
            "{} needs at least {} points, got {}",
            family.as_str(),
            family.num_params(),
            xs.len()
        )));
    }
    if !xs.iter().chain(ys).all(|v| v.is_finite()) {
        return Err(Error::invalid("curve fit data must be finite"));
    }
    if family.needs_positive_x() && xs.iter().any(|&x| x <= 0.0) {
        return Err(Error::invalid(format!("{} needs x > 0", family.as_str())));
    }
    let ynorm2: f64 = ys.iter().map(|y| y * y).sum();
    if ynorm2 == 0.0 {
        return Err(Error::invalid("relative error is undefined for all-zero data"));
    }
    let objective = |p: &[f64]| sum_squares(family, p, xs, ys);
    let ftol = 1e-32 * ynorm2;
    let max_evals = 2000 * family.num_params();

    let mut best: Option<(Vec<f64>, f64)> = None;
    for b in nonlinear_starts(family, xs) {
        let start = project(family, b, xs, ys);
        if !start.iter().all(|v| v.is_finite()) {
            continue;
        }
        let (p, v) = nelder_mead(&objective, &start, &initial_steps(&start), max_evals, ftol);
        if v.is_finite() && best.as_ref().is_none_or(|(_, bv)| v < *bv) {
            best = Some((p, v));
        }
    }
    let Some((mut p, mut v)) = best else {
        return Err(Error::FitFailed(format!("every start diverged for {}", family.as_str())));
    };
    // Polish: restart the simplex around the incumbent, then re-solve the
    // linear parameters exactly.
    for _ in 0..4 {
        let (q, w) = nelder_mead(&objective, &p, &initial_steps(&p), max_evals, ftol);
        let improved = w < v;
        if improved {
            p = q;
            v = w;
        }
        let proj = project(family, p[1], xs, ys);
        let pv = objective(&proj);
        if pv < v {
            p = proj;
            v = pv;
        } else if !improved {
            break;
        }
    }
    if !p.iter().all(|x| x.is_finite()) {
        return Err(Error::FitFailed(format!("non-finite parameters for {}", family.as_str())));
    }
    Ok(CurveFit {
        family,
        params: p,
        relative_error: (v / ynorm2).sqrt(),
    })
}
