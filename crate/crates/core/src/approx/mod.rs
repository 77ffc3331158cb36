//! Shape representation and the approximation families.

mod dct;
mod grid;
mod mp;
mod rbf;
mod wave;

use std::fmt;
use std::str::FromStr;

pub use dct::{dct_eval, dct_forward, DctTerm};
pub use grid::{
    builtin_shape, flatten, relative_error, scale_to_stroke, unflatten, BuiltinShape, ShapeGrid,
    ShapeVector,
};
pub use mp::{
    atom_eval, gaussian_periodized, mp_decompose, mp_eval, Decomposition, MatchingPursuit, MpAtom,
};
pub use rbf::{rbf_eval, RbfTerm};
pub use wave::{quarter_wavevector, WavePair};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ApproxError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate reference: initial shape equals target but current differs")]
    DegenerateReference,
}

pub(crate) fn invalid(msg: impl Into<String>) -> ApproxError {
    ApproxError::InvalidInput(msg.into())
}

/// Selects which function a module uses to turn a received term into input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FunctionForm {
    Dct,
    Mp,
    Rbf,
    Wave,
    Seq,
}

impl FunctionForm {
    pub const ALL: [FunctionForm; 5] = [
        FunctionForm::Dct,
        FunctionForm::Mp,
        FunctionForm::Rbf,
        FunctionForm::Wave,
        FunctionForm::Seq,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FunctionForm::Dct => "dct",
            FunctionForm::Mp => "mp",
            FunctionForm::Rbf => "rbf",
            FunctionForm::Wave => "wave",
            FunctionForm::Seq => "seq",
        }
    }
}

impl fmt::Display for FunctionForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FunctionForm {
    type Err = ApproxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FunctionForm::ALL
            .into_iter()
            .find(|form| form.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| invalid(format!("unknown function form `{s}`")))
    }
}

/// Reference height for one module, sent in its own addressed frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeqRef {
    pub module: usize,
    /// Target height in mm.
    pub height: f64,
}

/// One approximation term, i.e. the content of a single control message.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Term {
    Dct(DctTerm),
    Mp(MpAtom),
    Rbf(RbfTerm),
    Wave(WavePair),
    Seq(SeqRef),
}

impl Term {
    pub fn form(&self) -> FunctionForm {
        match self {
            Term::Dct(_) => FunctionForm::Dct,
            Term::Mp(_) => FunctionForm::Mp,
            Term::Rbf(_) => FunctionForm::Rbf,
            Term::Wave(_) => FunctionForm::Wave,
            Term::Seq(_) => FunctionForm::Seq,
        }
    }

    /// Magnitude used to order terms. `baseline` only matters for SEQ terms.
    fn weight(&self, baseline: f64, n_total: usize) -> f64 {
        match self {
            Term::Dct(t) => t.amplitude.abs(),
            // Raw peak amplitude says little about how much of the shape a
            // narrow or near-aliased atom carries; rank by sampled norm.
            Term::Mp(a) => a.coefficient(n_total),
            Term::Rbf(r) => r.amplitude.abs(),
            Term::Wave(w) => w.cos_amp.hypot(w.sin_amp),
            Term::Seq(s) => (s.height - baseline).abs(),
        }
    }
}

impl From<DctTerm> for Term {
    fn from(t: DctTerm) -> Self {
        Term::Dct(t)
    }
}

impl From<MpAtom> for Term {
    fn from(a: MpAtom) -> Self {
        Term::Mp(a)
    }
}

impl From<RbfTerm> for Term {
    fn from(r: RbfTerm) -> Self {
        Term::Rbf(r)
    }
}

impl From<WavePair> for Term {
    fn from(w: WavePair) -> Self {
        Term::Wave(w)
    }
}

impl From<SeqRef> for Term {
    fn from(s: SeqRef) -> Self {
        Term::Seq(s)
    }
}

/// An ordered list of terms of a single function form.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxPlan {
    pub form: FunctionForm,
    pub terms: Vec<Term>,
    /// Number of modules the terms are evaluated over.
    pub n_total: usize,
    /// Height (mm) every module starts from; SEQ terms are ranked by their
    /// distance to it.
    pub baseline: f64,
}

impl ApproxPlan {
    pub fn new(form: FunctionForm, terms: Vec<Term>, n_total: usize) -> Result<Self, ApproxError> {
        if let Some(bad) = terms.iter().find(|t| t.form() != form) {
            return Err(invalid(format!(
                "plan of form {form} contains a {} term",
                bad.form()
            )));
        }
        Ok(ApproxPlan {
            form,
            terms,
            n_total,
            baseline: 0.0,
        })
    }

    pub fn with_baseline(mut self, baseline: f64) -> Self {
        self.baseline = baseline;
        self
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Sorts terms by descending magnitude; ties keep their original order.
///
/// Magnitude is `|a_t|` for cosine and RBF terms, `|a|·‖atom‖` for
/// time-frequency atoms and `|h_n − baseline|` for sequential references.
pub fn order_terms(plan: ApproxPlan) -> ApproxPlan {
    let (baseline, n) = (plan.baseline, plan.n_total);
    let mut terms = plan.terms;
    // sort_by is stable, so equal weights keep ascending original index.
    terms.sort_by(|a, b| b.weight(baseline, n).total_cmp(&a.weight(baseline, n)));
    ApproxPlan { terms, ..plan }
}
