//! Modal right-hand sides of the open-loop, state-feedback and
//! output-feedback systems.
//!
//! State layout: the first `M` entries are the lifted plant coefficients
//! `p`; in output feedback they are followed by the stacked subdomain error
//! coefficients.

use nalgebra::{DMatrix, DVector};

use super::integrator::SplitSystem;
use super::nonlinearity::Nonlinearity;
use super::observer::ObserverBank;
use crate::design::ControllerDesign;
use crate::error::{Error, Result};
use crate::lifting::LiftingSystem;
use crate::spectral::{SineTransform, SpectralBasis};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    OpenLoop,
    StateFeedback,
    OutputFeedback,
}

impl std::str::FromStr for Kind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "open" | "open_loop" => Ok(Self::OpenLoop),
            "state" | "state_feedback" => Ok(Self::StateFeedback),
            "output" | "output_feedback" => Ok(Self::OutputFeedback),
            _ => Err(Error::Config(format!(
                "unknown scenario kind `{s}` (open|state|output)"
            ))),
        }
    }
}

/// `f(z)` on the grid of `transform`, projected back onto its modes.
pub fn project_nonlinearity(coeffs: &[f64], transform: &SineTransform, f: &Nonlinearity) -> Result<Vec<f64>> {
    if f.is_zero() {
        return Ok(vec![0.0; transform.len()]);
    }
    let mut field = transform.synthesize(coeffs)?;
    field.apply(|v| *v = f.eval(*v));
    transform.project(&field)
}

/// Feedback pieces shared by both closed loops.
#[derive(Clone, Debug)]
pub struct Feedback {
    pub m: f64,
    pub k: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub closed_loop_pinv: DMatrix<f64>,
    /// `M x N` lift and its `k`-weighted twin, truncated to the simulated modes.
    pub lift: DMatrix<f64>,
    pub lift_k: DMatrix<f64>,
}

impl Feedback {
    pub fn new(design: &ControllerDesign, sys: &LiftingSystem, modes: usize) -> Result<Self> {
        if modes < design.n || modes > sys.modes() {
            return Err(Error::DimensionMismatch {
                expected: sys.modes(),
                found: modes,
            });
        }
        Ok(Self {
            m: design.m,
            k: design.k.clone(),
            b: design.b.clone(),
            c: design.c.clone(),
            closed_loop_pinv: design.closed_loop_pinv.clone(),
            lift: sys.lift_matrix().rows(0, modes).into_owned(),
            lift_k: sys.lift_matrix_k().rows(0, modes).into_owned(),
        })
    }

    pub fn n(&self) -> usize {
        self.k.nrows()
    }
}

/// The semilinear modal system handed to the integrator.
pub struct ClosedLoop {
    kind: Kind,
    modes: usize,
    lambdas: Vec<f64>,
    transform: SineTransform,
    f: Nonlinearity,
    feedback: Option<Feedback>,
    observer: Option<ObserverBank>,
    decay: Vec<f64>,
}

/// Quantities reconstructed from a state vector.
#[derive(Clone, Debug)]
pub struct Outputs {
    pub u: Vec<f64>,
    /// Coefficients of `z = p + lift(u)`.
    pub z: Vec<f64>,
    pub norm_p: f64,
    pub norm_eps: f64,
    pub norm_z: f64,
    pub subdomain_eps: Vec<f64>,
}

fn norm(v: &[f64]) -> f64 {
    crate::linalg::norm2(v)
}

impl ClosedLoop {
    pub fn open_loop(basis: &SpectralBasis, modes: usize, transform: SineTransform, f: Nonlinearity) -> Result<Self> {
        Self::assemble(Kind::OpenLoop, basis, modes, transform, f, None, None)
    }

    pub fn state_feedback(
        basis: &SpectralBasis,
        modes: usize,
        transform: SineTransform,
        f: Nonlinearity,
        feedback: Feedback,
    ) -> Result<Self> {
        Self::assemble(Kind::StateFeedback, basis, modes, transform, f, Some(feedback), None)
    }

    pub fn output_feedback(
        basis: &SpectralBasis,
        modes: usize,
        transform: SineTransform,
        f: Nonlinearity,
        feedback: Feedback,
        observer: ObserverBank,
    ) -> Result<Self> {
        Self::assemble(
            Kind::OutputFeedback,
            basis,
            modes,
            transform,
            f,
            Some(feedback),
            Some(observer),
        )
    }

    fn assemble(
        kind: Kind,
        basis: &SpectralBasis,
        modes: usize,
        transform: SineTransform,
        f: Nonlinearity,
        feedback: Option<Feedback>,
        observer: Option<ObserverBank>,
    ) -> Result<Self> {
        if modes > basis.count() || transform.len() != modes {
            return Err(Error::DimensionMismatch {
                expected: modes,
                found: transform.len(),
            });
        }
        if !transform.resolves(super::OVERSAMPLING) {
            log::warn!("quadrature grid under-resolves the basis; aliasing of f(z) is possible");
        }
        let lambdas: Vec<f64> = basis.modes()[..modes].iter().map(|m| m.lambda).collect();
        let mut decay = lambdas.clone();
        if let Some(fb) = &feedback {
            for d in decay.iter_mut().take(fb.n()) {
                *d = fb.m;
            }
        }
        if let Some(obs) = &observer {
            for b in &obs.banks {
                decay.extend_from_slice(&b.lambdas);
            }
        }
        Ok(Self {
            kind,
            modes,
            lambdas,
            transform,
            f,
            feedback,
            observer,
            decay,
        })
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn dim(&self) -> usize {
        self.decay.len()
    }

    pub fn observer(&self) -> Option<&ObserverBank> {
        self.observer.as_ref()
    }

    /// `(eps_s, u)` for a state vector.
    fn control(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let Some(fb) = &self.feedback else {
            return (Vec::new(), Vec::new());
        };
        let n = fb.n();
        let eps_s = match &self.observer {
            Some(obs) => obs.globalize(&y[self.modes..], n),
            None => vec![0.0; n],
        };
        let est = DVector::from_iterator(n, (0..n).map(|i| y[i] - eps_s[i]));
        let u = (&fb.k * est).as_slice().to_vec();
        (eps_s, u)
    }

    fn lifted(&self, p: &[f64], u: &[f64]) -> Vec<f64> {
        let mut z = p.to_vec();
        if let Some(fb) = &self.feedback {
            let lu = &fb.lift * DVector::from_column_slice(u);
            for (zi, li) in z.iter_mut().zip(lu.iter()) {
                *zi += li;
            }
        }
        z
    }

    pub fn outputs(&self, y: &[f64]) -> Outputs {
        let (_, u) = self.control(y);
        let p = &y[..self.modes];
        let z = self.lifted(p, &u);
        let subdomain_eps: Vec<f64> = match &self.observer {
            Some(obs) => {
                let mut off = self.modes;
                obs.banks
                    .iter()
                    .map(|b| {
                        let v = norm(&y[off..off + b.len()]);
                        off += b.len();
                        v
                    })
                    .collect()
            }
            None => Vec::new(),
        };
        Outputs {
            norm_p: norm(p),
            norm_eps: norm(&subdomain_eps),
            norm_z: norm(&z),
            u,
            z,
            subdomain_eps,
        }
    }
}

impl SplitSystem for ClosedLoop {
    fn decay(&self) -> &[f64] {
        &self.decay
    }

    fn forcing(&self, _t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        let mdim = self.modes;
        let p = &y[..mdim];
        let (eps_s, u) = self.control(y);
        let z = self.lifted(p, &u);
        let fz = project_nonlinearity(&z, &self.transform, &self.f)?;

        let Some(fb) = &self.feedback else {
            out[..mdim].copy_from_slice(&fz);
            return Ok(());
        };
        let n = fb.n();

        // observer errors: e_i' = -lambda e_i + P_i (f(z) - f(z - eps_i))
        let mut eps_dot_s = vec![0.0; n];
        if let Some(obs) = &self.observer {
            let mut off = mdim;
            let mut edot = vec![0.0; obs.dim()];
            for b in &obs.banks {
                let e = &y[off..off + b.len()];
                let g = if self.f.is_zero() {
                    vec![0.0; b.len()]
                } else {
                    let zf = b.global.synthesize(&z)?;
                    let ef = b.local.synthesize(e)?;
                    let diff = DMatrix::from_fn(zf.nrows(), zf.ncols(), |r, c| {
                        self.f.eval(zf[(r, c)]) - self.f.eval(zf[(r, c)] - ef[(r, c)])
                    });
                    b.local.project(&diff)?
                };
                for q in 0..b.len() {
                    out[off + q] = g[q];
                    edot[off - mdim + q] = g[q] - b.lambdas[q] * e[q];
                }
                off += b.len();
            }
            eps_dot_s = obs.globalize(&edot, n);
        }

        // (I + BK)(p_s' + m p_s) = f_s + C K eps_s + B K eps_s'
        let fs = DVector::from_column_slice(&fz[..n]);
        let rhs = if self.observer.is_some() {
            let ke = &fb.k * DVector::from_column_slice(&eps_s);
            let kde = &fb.k * DVector::from_column_slice(&eps_dot_s);
            fs + &fb.c * ke + &fb.b * kde
        } else {
            fs
        };
        let w = &fb.closed_loop_pinv * rhs;
        out[..n].copy_from_slice(w.as_slice());

        // tail: p_n' = -lambda_n p_n + f_n + (L_k u - L u')_n, u' = K (p_s' - eps_s')
        let ps_dot = DVector::from_iterator(n, (0..n).map(|i| w[i] - fb.m * y[i]));
        let u_dot = &fb.k * (ps_dot - DVector::from_column_slice(&eps_dot_s));
        let uv = DVector::from_column_slice(&u);
        let coupling = &fb.lift_k * uv - &fb.lift * u_dot;
        for idx in n..mdim {
            out[idx] = fz[idx] + coupling[idx];
        }
        Ok(())
    }
}

impl ClosedLoop {
    /// Eigenvalues of the simulated modes.
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }
}
