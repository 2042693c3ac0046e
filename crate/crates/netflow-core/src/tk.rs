//! Approximation experiments along a growing network sequence.
//!
//! A network sequence with inclusions induces, between the edge-function
//! space of each member and the space of a fixed reference member, the
//! embed/cut-off pair `(E_n, P_n)` with `P_n E_n = Id` and both norms at
//! most one. The harness measures, per sequence index, probe and parameter,
//!
//! - resolvent approximation errors `||E_n R(l, A_n) P_n x - R(l, A_ref) x||`,
//! - semigroup approximation errors `||E_n T_n(t) P_n x - T_ref(t) x||`
//!   together with their sup over the time grid,
//!
//! and supports rebuilding semigroup values from resolvent data alone via
//! backward-difference powers. The reference member stands in for the
//! untruncated limit: with unit velocities influence moves one edge per time
//! unit, so a reference far enough out is exact for the compared horizon.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use num_complex::Complex64;

use crate::flow::{Evolver, FlowError, FlowSystem};
use crate::graph::{ladder_sequence, GraphSequence, SequenceError};
use crate::grid::{ApproxPair, ApproxPairError, GridError, GridFunction};
use crate::matrices::VelocityProfile;
use crate::resolvent::{DenseMatrix, LuFactors, ResolventError, ResolventOperator};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq)]
pub enum TkError {
    Sequence(SequenceError),
    Flow {
        n: usize,
        source: FlowError,
    },
    Resolvent {
        n: usize,
        lambda: Complex64,
        source: ResolventError,
    },
    Pair {
        n: usize,
        source: ApproxPairError,
    },
    Grid(GridError),
    ReferenceOutOfRange {
        reference: usize,
        len: usize,
    },
    CompareOutOfRange {
        n: usize,
        reference: usize,
    },
    VelocityCount {
        n: usize,
        edges: usize,
        velocities: usize,
    },
    VelocityMismatch {
        n: usize,
        edge: usize,
    },
    LambdaNotAdmissible {
        lambda: Complex64,
    },
    BadTime {
        t: f64,
    },
    ProbeShape {
        id: String,
    },
    NoProbes,
    InsufficientIndices {
        got: usize,
    },
    StepsBelowBase {
        lambda: f64,
        lambda_base: f64,
    },
    BadCfl {
        cfl: f64,
    },
    ContractViolated {
        n: usize,
    },
}

impl fmt::Display for TkError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TkError::Sequence(e) => write!(f, "{}", e),
            TkError::Flow { n, source } => write!(f, "flow on G_{}: {}", n, source),
            TkError::Resolvent { n, lambda, source } => {
                if *n == 0 {
                    write!(
                        f,
                        "resolvent at lambda = {}+{}i: {}",
                        lambda.re, lambda.im, source
                    )
                } else {
                    write!(
                        f,
                        "resolvent on G_{} at lambda = {}+{}i: {}",
                        n, lambda.re, lambda.im, source
                    )
                }
            }
            TkError::Pair { n, source } => write!(f, "embedding for G_{}: {}", n, source),
            TkError::Grid(e) => write!(f, "{}", e),
            TkError::ReferenceOutOfRange { reference, len } => write!(
                f,
                "reference index {} outside the sequence of length {}",
                reference, len
            ),
            TkError::CompareOutOfRange { n, reference } => write!(
                f,
                "compared index {} exceeds the reference index {}",
                n, reference
            ),
            TkError::VelocityCount {
                n,
                edges,
                velocities,
            } => write!(
                f,
                "G_{} has {} edges but {} velocities",
                n, edges, velocities
            ),
            TkError::VelocityMismatch { n, edge } => write!(
                f,
                "velocity of edge e{} changes between G_{} and G_{}",
                edge + 1,
                n,
                n + 1
            ),
            TkError::LambdaNotAdmissible { lambda } => write!(
                f,
                "lambda = {}+{}i needs a positive real part",
                lambda.re, lambda.im
            ),
            TkError::BadTime { t } => write!(f, "time {} is not admissible", t),
            TkError::ProbeShape { id } => {
                write!(f, "probe '{}' does not match the reference space", id)
            }
            TkError::NoProbes => write!(f, "experiment needs at least one probe"),
            TkError::InsufficientIndices { got } => write!(
                f,
                "limit candidate needs at least two compared indices, got {}",
                got
            ),
            TkError::StepsBelowBase {
                lambda,
                lambda_base,
            } => write!(
                f,
                "steps/t = {} falls below the base rate {}",
                lambda, lambda_base
            ),
            TkError::BadCfl { cfl } => write!(f, "cfl must lie in (0, 1], got {}", cfl),
            TkError::ContractViolated { n } => write!(
                f,
                "embed/cut-off contract violated at index {} (P E != Id or norms exceed 1)",
                n
            ),
        }
    }
}

impl From<GridError> for TkError {
    fn from(e: GridError) -> Self {
        TkError::Grid(e)
    }
}

/// Named probe function on the reference space.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub id: String,
    pub function: GridFunction<f64>,
}

/// A fully specified approximation experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct TkExperiment {
    sequence: GraphSequence,
    velocities: Vec<VelocityProfile>,
    reference_index: usize,
    compare_indices: Vec<usize>,
    times: Vec<f64>,
    lambdas: Vec<Complex64>,
    probes: Vec<Probe>,
    cells: usize,
    seed: u64,
    upwind_cfl: f64,
}

impl TkExperiment {
    /// Validating constructor; indices are 1-based sequence positions.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        sequence: GraphSequence,
        velocities: Vec<VelocityProfile>,
        reference_index: usize,
        compare_indices: Vec<usize>,
        times: Vec<f64>,
        lambdas: Vec<Complex64>,
        probes: Vec<Probe>,
        cells: usize,
        seed: u64,
        upwind_cfl: f64,
    ) -> Result<Self, TkError> {
        sequence.validate().map_err(TkError::Sequence)?;
        if reference_index == 0 || reference_index > sequence.len() {
            return Err(TkError::ReferenceOutOfRange {
                reference: reference_index,
                len: sequence.len(),
            });
        }
        for (idx, profile) in velocities.iter().enumerate() {
            let edges = sequence.graph(idx).edge_count();
            if profile.len() != edges {
                return Err(TkError::VelocityCount {
                    n: idx + 1,
                    edges,
                    velocities: profile.len(),
                });
            }
        }
        // Retained edges keep their velocity along every link.
        for n in 0..sequence.len() - 1 {
            let edge_map = sequence
                .link(n)
                .edge_map()
                .expect("validated links are homomorphisms");
            for (e, &img) in edge_map.iter().enumerate() {
                if velocities[n].get(e) != velocities[n + 1].get(img) {
                    return Err(TkError::VelocityMismatch { n: n + 1, edge: e });
                }
            }
        }
        for &n in &compare_indices {
            if n == 0 || n > reference_index {
                return Err(TkError::CompareOutOfRange {
                    n,
                    reference: reference_index,
                });
            }
        }
        for &lambda in &lambdas {
            if lambda.re <= 0.0 {
                return Err(TkError::LambdaNotAdmissible { lambda });
            }
        }
        for &t in &times {
            if !t.is_finite() || t < 0.0 {
                return Err(TkError::BadTime { t });
            }
        }
        if probes.is_empty() {
            return Err(TkError::NoProbes);
        }
        let reference_edges = sequence.graph(reference_index - 1).edge_count();
        for probe in &probes {
            if probe.function.edge_count() != reference_edges || probe.function.cells() != cells {
                return Err(TkError::ProbeShape {
                    id: probe.id.clone(),
                });
            }
        }
        if !(upwind_cfl > 0.0 && upwind_cfl <= 1.0) {
            return Err(TkError::BadCfl { cfl: upwind_cfl });
        }
        Ok(Self {
            sequence,
            velocities,
            reference_index,
            compare_indices,
            times,
            lambdas,
            probes,
            cells,
            seed,
            upwind_cfl,
        })
    }

    /// Standard experiment on the ladder family with unit velocities and the
    /// default probe set.
    pub fn ladder(
        n_max: usize,
        reference: usize,
        cells: usize,
        times: Vec<f64>,
        lambdas: Vec<Complex64>,
        seed: u64,
    ) -> Result<Self, TkError> {
        assert!(n_max >= 1 && reference >= n_max, "need n_max <= reference");
        let sequence = ladder_sequence(reference);
        let velocities = sequence
            .graphs()
            .iter()
            .map(|g| VelocityProfile::unit(g.edge_count()))
            .collect();
        let reference_edges = sequence.graph(reference - 1).edge_count();
        let support = sequence.graph(0).edge_count();
        let probes = default_probes(reference_edges, support, cells, seed);
        Self::new(
            sequence,
            velocities,
            reference,
            (1..=n_max).collect(),
            times,
            lambdas,
            probes,
            cells,
            seed,
            1.0,
        )
    }

    pub fn sequence(&self) -> &GraphSequence {
        &self.sequence
    }

    pub fn reference_index(&self) -> usize {
        self.reference_index
    }

    pub fn compare_indices(&self) -> &[usize] {
        &self.compare_indices
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn lambdas(&self) -> &[Complex64] {
        &self.lambdas
    }

    pub fn probes(&self) -> &[Probe] {
        &self.probes
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Flow system of the 1-based sequence member `n`.
    pub fn system_for(&self, n: usize) -> Result<FlowSystem, TkError> {
        FlowSystem::new(
            self.sequence.graph(n - 1).clone(),
            self.velocities[n - 1].clone(),
        )
        .map_err(|source| TkError::Flow { n, source })
    }

    /// Embed/cut-off pair between member `n` and the reference member.
    pub fn pair_for(&self, n: usize) -> Result<ApproxPair, TkError> {
        let inclusion = self
            .sequence
            .inclusion(n - 1, self.reference_index - 1)
            .expect("validated indices");
        let edge_map = inclusion.edge_map().expect("validated inclusion");
        ApproxPair::new(
            self.sequence.graph(n - 1).edge_count(),
            self.sequence.graph(self.reference_index - 1).edge_count(),
            edge_map,
        )
        .map_err(|source| TkError::Pair { n, source })
    }

    /// Exact evaluator when every member has unit velocities, upwind otherwise.
    pub fn evolver(&self) -> Evolver {
        if self.velocities.iter().all(VelocityProfile::is_unit) {
            Evolver::Exact
        } else {
            Evolver::Upwind {
                cfl: self.upwind_cfl,
            }
        }
    }

    fn velocity_summary(&self) -> String {
        if self.velocities.iter().all(VelocityProfile::is_unit) {
            "unit".to_string()
        } else {
            let reference = &self.velocities[self.reference_index - 1];
            format!(
                "bounds [{}, {}]",
                reference.min_bound(),
                reference.max_bound()
            )
        }
    }
}

/// Default probe family: the indicator of the first edge, the constant
/// function on the support edges, and five seeded nonnegative random
/// functions on the same support.
pub fn default_probes(
    reference_edges: usize,
    support_edges: usize,
    cells: usize,
    seed: u64,
) -> Vec<Probe> {
    let mut probes = Vec::with_capacity(7);
    probes.push(Probe {
        id: "ind-e1".to_string(),
        function: GridFunction::edge_indicator(reference_edges, cells, 0, 1.0),
    });
    let mut constant = GridFunction::zeros(reference_edges, cells);
    for j in 0..support_edges {
        for k in 0..cells {
            constant.set(j, k, 1.0);
        }
    }
    probes.push(Probe {
        id: "const-g1".to_string(),
        function: constant,
    });
    for p in 0..5 {
        let mut rng = SplitMix64::new(seed.wrapping_add(0x9e37 + p as u64));
        let mut f = GridFunction::zeros(reference_edges, cells);
        for j in 0..support_edges {
            for k in 0..cells {
                f.set(j, k, rng.next_f64());
            }
        }
        probes.push(Probe {
            id: format!("rand-{}", p),
            function: f,
        });
    }
    probes
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    Resolvent,
    Semigroup,
}

impl ReportKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ReportKind::Resolvent => "resolvent",
            ReportKind::Semigroup => "semigroup",
        }
    }
}

/// The swept parameter of a report row: a time or a spectral point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamValue {
    Time(f64),
    Lambda(Complex64),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ParamValue::Time(t) => write!(f, "{}", t),
            ParamValue::Lambda(l) => {
                if l.im == 0.0 {
                    write!(f, "{}", l.re)
                } else if l.im > 0.0 {
                    write!(f, "{}+{}i", l.re, l.im)
                } else {
                    write!(f, "{}-{}i", l.re, -l.im)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub kind: ReportKind,
    pub n: usize,
    pub param: ParamValue,
    pub probe: String,
    pub error: f64,
}

/// Sup over the time grid per index and probe.
#[derive(Debug, Clone, PartialEq)]
pub struct SupRow {
    pub n: usize,
    pub probe: String,
    pub sup_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportMeta {
    pub cells: usize,
    pub seed: u64,
    pub evaluator: String,
    pub velocities: String,
}

/// Error table of one harness run.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ReportRow>,
    /// Populated by the semigroup harness only.
    pub semigroup_sup: Vec<SupRow>,
    pub meta: ReportMeta,
}

impl ConvergenceReport {
    pub fn is_finite(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.error.is_finite() && r.error >= 0.0)
    }
}

/// Reference-side data shared by all per-index resolvent computations.
pub struct Tk1ResolventContext {
    reference_images: Vec<Vec<GridFunction<Complex64>>>,
}

/// Applies the reference resolvent to every probe for every lambda.
pub fn tk1_resolvent_context(exp: &TkExperiment) -> Result<Tk1ResolventContext, TkError> {
    let ref_sys = exp.system_for(exp.reference_index())?;
    let mut reference_images = Vec::with_capacity(exp.lambdas().len());
    for &lambda in exp.lambdas() {
        let op = ResolventOperator::new(&ref_sys, lambda).map_err(|source| TkError::Resolvent {
            n: exp.reference_index(),
            lambda,
            source,
        })?;
        let mut images = Vec::with_capacity(exp.probes().len());
        for probe in exp.probes() {
            images.push(
                op.apply_real(&probe.function)
                    .map_err(|source| TkError::Resolvent {
                        n: exp.reference_index(),
                        lambda,
                        source,
                    })?,
            );
        }
        reference_images.push(images);
    }
    Ok(Tk1ResolventContext { reference_images })
}

/// Precondition of both approximation theorems, verified on every run:
/// `P_n E_n = Id` exactly and both operators contract the norm.
fn verify_pair_contract(exp: &TkExperiment, pair: &ApproxPair, n: usize) -> Result<(), TkError> {
    for probe in exp.probes() {
        let cut = pair.project(&probe.function)?;
        let lifted = pair.embed(&cut)?;
        if pair.project(&lifted)? != cut {
            return Err(TkError::ContractViolated { n });
        }
        if lifted.l1_norm() > cut.l1_norm() + 1e-12
            || cut.l1_norm() > probe.function.l1_norm() + 1e-12
        {
            return Err(TkError::ContractViolated { n });
        }
    }
    Ok(())
}

/// Resolvent error rows for one compared index.
pub fn tk1_resolvent_rows(
    exp: &TkExperiment,
    ctx: &Tk1ResolventContext,
    n: usize,
) -> Result<Vec<ReportRow>, TkError> {
    let sys = exp.system_for(n)?;
    let pair = exp.pair_for(n)?;
    verify_pair_contract(exp, &pair, n)?;
    let mut rows = Vec::new();
    for (li, &lambda) in exp.lambdas().iter().enumerate() {
        let op = ResolventOperator::new(&sys, lambda).map_err(|source| TkError::Resolvent {
            n,
            lambda,
            source,
        })?;
        for (pi, probe) in exp.probes().iter().enumerate() {
            let cut = pair.project(&probe.function)?;
            let local =
                op.apply_real(&cut)
                    .map_err(|source| TkError::Resolvent { n, lambda, source })?;
            let lifted = pair.embed(&local)?;
            let error = lifted.l1_distance(&ctx.reference_images[li][pi])?;
            rows.push(ReportRow {
                kind: ReportKind::Resolvent,
                n,
                param: ParamValue::Lambda(lambda),
                probe: probe.id.clone(),
                error,
            });
        }
    }
    Ok(rows)
}

/// Full resolvent convergence table across the compared indices.
pub fn tk1_resolvent_errors(exp: &TkExperiment) -> Result<ConvergenceReport, TkError> {
    let ctx = tk1_resolvent_context(exp)?;
    let mut rows = Vec::new();
    for &n in exp.compare_indices() {
        rows.extend(tk1_resolvent_rows(exp, &ctx, n)?);
    }
    Ok(ConvergenceReport {
        rows,
        semigroup_sup: Vec::new(),
        meta: ReportMeta {
            cells: exp.cells(),
            seed: exp.seed(),
            evaluator: "resolvent".to_string(),
            velocities: exp.velocity_summary(),
        },
    })
}

/// Reference-side data shared by all per-index semigroup computations.
pub struct Tk1SemigroupContext {
    reference_states: Vec<Vec<GridFunction<f64>>>,
    evolver: Evolver,
}

/// Evolves every probe on the reference system for every listed time.
pub fn tk1_semigroup_context(exp: &TkExperiment) -> Result<Tk1SemigroupContext, TkError> {
    let ref_sys = exp.system_for(exp.reference_index())?;
    let evolver = exp.evolver();
    let mut reference_states = Vec::with_capacity(exp.times().len());
    for &t in exp.times() {
        let mut states = Vec::with_capacity(exp.probes().len());
        for probe in exp.probes() {
            states.push(
                evolver
                    .evolve(&ref_sys, &probe.function, t)
                    .map_err(|source| TkError::Flow {
                        n: exp.reference_index(),
                        source,
                    })?,
            );
        }
        reference_states.push(states);
    }
    Ok(Tk1SemigroupContext {
        reference_states,
        evolver,
    })
}

/// Semigroup error rows (and per-probe sup) for one compared index.
pub fn tk1_semigroup_rows(
    exp: &TkExperiment,
    ctx: &Tk1SemigroupContext,
    n: usize,
) -> Result<(Vec<ReportRow>, Vec<SupRow>), TkError> {
    let sys = exp.system_for(n)?;
    let pair = exp.pair_for(n)?;
    verify_pair_contract(exp, &pair, n)?;
    let mut rows = Vec::new();
    let mut sups = vec![0.0f64; exp.probes().len()];
    for (ti, &t) in exp.times().iter().enumerate() {
        for (pi, probe) in exp.probes().iter().enumerate() {
            let cut = pair.project(&probe.function)?;
            let local = ctx
                .evolver
                .evolve(&sys, &cut, t)
                .map_err(|source| TkError::Flow { n, source })?;
            let lifted = pair.embed(&local)?;
            let error = lifted.l1_distance(&ctx.reference_states[ti][pi])?;
            sups[pi] = libm::fmax(sups[pi], error);
            rows.push(ReportRow {
                kind: ReportKind::Semigroup,
                n,
                param: ParamValue::Time(t),
                probe: probe.id.clone(),
                error,
            });
        }
    }
    let sup_rows = exp
        .probes()
        .iter()
        .zip(sups)
        .map(|(probe, sup_error)| SupRow {
            n,
            probe: probe.id.clone(),
            sup_error,
        })
        .collect();
    Ok((rows, sup_rows))
}

/// Full semigroup convergence table across the compared indices.
pub fn tk1_semigroup_errors(exp: &TkExperiment) -> Result<ConvergenceReport, TkError> {
    let ctx = tk1_semigroup_context(exp)?;
    let mut rows = Vec::new();
    let mut semigroup_sup = Vec::new();
    for &n in exp.compare_indices() {
        let (r, s) = tk1_semigroup_rows(exp, &ctx, n)?;
        rows.extend(r);
        semigroup_sup.extend(s);
    }
    let evaluator = match ctx.evolver {
        Evolver::Exact => "exact".to_string(),
        Evolver::Upwind { cfl } => format!("upwind cfl={}", cfl),
    };
    Ok(ConvergenceReport {
        rows,
        semigroup_sup,
        meta: ReportMeta {
            cells: exp.cells(),
            seed: exp.seed(),
            evaluator,
            velocities: exp.velocity_summary(),
        },
    })
}

/// Candidate limit operator built from approximants alone.
#[derive(Debug, Clone, PartialEq)]
pub struct Tk2LimitCandidate {
    pub lambda: Complex64,
    /// Sequence index whose approximant serves as the candidate.
    pub at_index: usize,
    /// Max over probes of the approximant difference at the top two indices.
    pub cauchy_gap: f64,
    /// Relative l1 distance of each probe to the span of the candidate images.
    pub range_density: Vec<(String, f64)>,
}

/// The approximant `x -> E_n R(lambda, A_n) P_n x` at index `n`.
pub fn tk2_candidate_apply(
    exp: &TkExperiment,
    lambda: Complex64,
    n: usize,
    x: &GridFunction<f64>,
) -> Result<GridFunction<Complex64>, TkError> {
    let sys = exp.system_for(n)?;
    let pair = exp.pair_for(n)?;
    let op = ResolventOperator::new(&sys, lambda).map_err(|source| TkError::Resolvent {
        n,
        lambda,
        source,
    })?;
    let local = op
        .apply_real(&pair.project(x)?)
        .map_err(|source| TkError::Resolvent { n, lambda, source })?;
    Ok(pair.embed(&local)?)
}

/// Empirical construction for the second approximation theorem: accept the
/// last approximant as the limit candidate, measure its Cauchy gap at the
/// top two indices, and probe the density of its range.
pub fn tk2_limit_candidate(
    exp: &TkExperiment,
    lambda: Complex64,
) -> Result<Tk2LimitCandidate, TkError> {
    let indices = exp.compare_indices();
    if indices.len() < 2 {
        return Err(TkError::InsufficientIndices { got: indices.len() });
    }
    let (prev, top) = (indices[indices.len() - 2], indices[indices.len() - 1]);

    let mut basis = Vec::with_capacity(exp.probes().len());
    let mut cauchy_gap = 0.0f64;
    for probe in exp.probes() {
        let at_top = tk2_candidate_apply(exp, lambda, top, &probe.function)?;
        let at_prev = tk2_candidate_apply(exp, lambda, prev, &probe.function)?;
        cauchy_gap = libm::fmax(cauchy_gap, at_top.l1_distance(&at_prev)?);
        basis.push(at_top);
    }

    let range_density = exp
        .probes()
        .iter()
        .map(|probe| {
            let distance = relative_distance_to_span(&basis, &probe.function.to_complex());
            (probe.id.clone(), distance)
        })
        .collect();

    Ok(Tk2LimitCandidate {
        lambda,
        at_index: top,
        cauchy_gap,
        range_density,
    })
}

/// Relative l1 distance from `y` to the span of `basis`, via least squares
/// on the discretized vectors. Returns 0 for `y = 0`.
pub fn relative_distance_to_span(
    basis: &[GridFunction<Complex64>],
    y: &GridFunction<Complex64>,
) -> f64 {
    let y_norm = y.l1_norm();
    if y_norm == 0.0 || basis.is_empty() {
        return 0.0;
    }
    let k = basis.len();
    let inner = |a: &GridFunction<Complex64>, b: &GridFunction<Complex64>| -> Complex64 {
        a.values()
            .iter()
            .zip(b.values())
            .map(|(u, v)| u.conj() * v)
            .sum()
    };
    let mut gram = DenseMatrix::zeros(k);
    let mut rhs = vec![Complex64::new(0.0, 0.0); k];
    for i in 0..k {
        for j in 0..k {
            gram.set(i, j, inner(&basis[i], &basis[j]));
        }
        rhs[i] = inner(&basis[i], y);
    }
    // Ridge keeps a rank-deficient Gram matrix solvable; the proxy only
    // needs the residual, not the coefficients.
    let trace: f64 = (0..k).map(|i| gram.get(i, i).re).sum();
    let ridge = 1e-12 * libm::fmax(trace / k as f64, 1e-300);
    for i in 0..k {
        let v = gram.get(i, i) + Complex64::new(ridge, 0.0);
        gram.set(i, i, v);
    }
    let lu = match LuFactors::factor(&gram) {
        Some(lu) => lu,
        None => return 1.0,
    };
    let mut coeffs = rhs;
    lu.solve_in_place(&mut coeffs);
    let mut residual = y.clone();
    for (c, b) in coeffs.iter().zip(basis) {
        let scaled_values: Vec<Complex64> = b.values().iter().map(|&v| *c * v).collect();
        let scaled =
            GridFunction::from_values(b.edge_count(), b.cells(), scaled_values).expect("finite");
        residual = residual.sub(&scaled).expect("same shape");
    }
    residual.l1_norm() / y_norm
}

/// Rebuilds a semigroup value from resolvent data alone via the
/// backward-difference exponential formula `((k/t) R(k/t, A))^k f`.
///
/// `lambda_base` is the smallest admissible rate: the step count must
/// satisfy `steps / t >= lambda_base`.
pub fn tk2_semigroup_from_resolvent(
    sys: &FlowSystem,
    lambda_base: f64,
    t: f64,
    f: &GridFunction<f64>,
    steps: usize,
) -> Result<GridFunction<f64>, TkError> {
    if !t.is_finite() || t <= 0.0 {
        return Err(TkError::BadTime { t });
    }
    assert!(steps >= 1, "steps must be positive");
    let lambda = steps as f64 / t;
    if lambda < lambda_base {
        return Err(TkError::StepsBelowBase {
            lambda,
            lambda_base,
        });
    }
    let op = ResolventOperator::new(sys, Complex64::new(lambda, 0.0)).map_err(|source| {
        TkError::Resolvent {
            n: 0,
            lambda: Complex64::new(lambda, 0.0),
            source,
        }
    })?;
    let mut state = f.to_complex();
    for _ in 0..steps {
        state = op
            .apply(&state)
            .map_err(|source| TkError::Resolvent {
                n: 0,
                lambda: Complex64::new(lambda, 0.0),
                source,
            })?
            .scaled(lambda);
    }
    Ok(state.real_part())
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman_rank_correlation(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n < 2 {
        return 1.0;
    }
    let ranks = |vals: &[f64]| -> Vec<f64> {
        let mut order: Vec<usize> = (0..vals.len()).collect();
        order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).expect("finite values"));
        let mut ranks = vec![0.0; vals.len()];
        let mut i = 0;
        while i < order.len() {
            let mut j = i;
            while j + 1 < order.len() && vals[order[j + 1]] == vals[order[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &idx in &order[i..=j] {
                ranks[idx] = avg;
            }
            i = j + 1;
        }
        ranks
    };
    let (rx, ry) = (ranks(xs), ranks(ys));
    let mean = (n as f64 + 1.0) / 2.0;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for i in 0..n {
        cov += (rx[i] - mean) * (ry[i] - mean);
        var_x += (rx[i] - mean) * (rx[i] - mean);
        var_y += (ry[i] - mean) * (ry[i] - mean);
    }
    if var_x == 0.0 || var_y == 0.0 {
        return 1.0;
    }
    cov / libm::sqrt(var_x * var_y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::evolve_exact;
    use crate::graph::{DirectedGraph, GraphHomomorphism};

    fn small_ladder_experiment() -> TkExperiment {
        TkExperiment::ladder(
            3,
            5,
            64,
            vec![0.0, 0.5, 1.0, 2.0],
            vec![Complex64::new(2.0, 0.0)],
            42,
        )
        .unwrap()
    }

    #[test]
    fn experiment_validates_and_reports_shapes() {
        let exp = small_ladder_experiment();
        assert_eq!(exp.probes().len(), 7);
        assert_eq!(exp.sequence().len(), 5);
        assert_eq!(exp.evolver(), Evolver::Exact);
        // Ladder inclusions are prefix injections.
        let pair = exp.pair_for(2).unwrap();
        assert_eq!(pair.injection(), (0..9).collect::<Vec<_>>().as_slice());
    }

    #[test]
    fn pn_en_identity_and_contractions() {
        let exp = small_ladder_experiment();
        for &n in exp.compare_indices() {
            let pair = exp.pair_for(n).unwrap();
            for probe in exp.probes() {
                let cut = pair.project(&probe.function).unwrap();
                let roundtrip = pair.project(&pair.embed(&cut).unwrap()).unwrap();
                assert_eq!(roundtrip, cut);
                assert!(pair.embed(&cut).unwrap().l1_norm() <= cut.l1_norm() + 1e-15);
                assert!(cut.l1_norm() <= probe.function.l1_norm() + 1e-15);
            }
        }
    }

    #[test]
    fn reference_index_errors_are_zero() {
        let mut exp = small_ladder_experiment();
        exp.compare_indices = vec![5];
        let resolvent = tk1_resolvent_errors(&exp).unwrap();
        for row in &resolvent.rows {
            assert!(row.error <= 1e-12, "row {:?}", row);
        }
        let semigroup = tk1_semigroup_errors(&exp).unwrap();
        for row in &semigroup.rows {
            assert!(row.error <= 1e-12, "row {:?}", row);
        }
    }

    #[test]
    fn time_zero_error_is_outside_mass() {
        let exp = small_ladder_experiment();
        let report = tk1_semigroup_errors(&exp).unwrap();
        // Probes live on G_1's edges, so E_n P_n x = x and the t = 0 error vanishes.
        for row in report
            .rows
            .iter()
            .filter(|r| r.param == ParamValue::Time(0.0))
        {
            assert!(row.error <= 1e-15);
        }
        // A probe with mass outside G_n keeps exactly that mass as t = 0 error.
        let mut probe_fn = GridFunction::zeros(21, 64);
        for k in 0..64 {
            probe_fn.set(20, k, 1.0);
        }
        let exp2 = TkExperiment::new(
            ladder_sequence(5),
            (0..5).map(|i| VelocityProfile::unit(5 + 4 * i)).collect(),
            5,
            vec![1],
            vec![0.0],
            vec![],
            vec![Probe {
                id: "outside".to_string(),
                function: probe_fn,
            }],
            64,
            1,
            1.0,
        )
        .unwrap();
        let report = tk1_semigroup_errors(&exp2).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert!((report.rows[0].error - 1.0).abs() < 1e-14);
    }

    #[test]
    fn resolvent_errors_decrease_along_ladder() {
        let exp =
            TkExperiment::ladder(4, 6, 64, vec![0.0], vec![Complex64::new(2.0, 0.0)], 7).unwrap();
        let report = tk1_resolvent_errors(&exp).unwrap();
        for probe in exp.probes() {
            let errors: Vec<f64> = exp
                .compare_indices()
                .iter()
                .map(|&n| {
                    report
                        .rows
                        .iter()
                        .find(|r| r.n == n && r.probe == probe.id)
                        .unwrap()
                        .error
                })
                .collect();
            for w in errors.windows(2) {
                assert!(w[1] < w[0], "{}: {:?}", probe.id, errors);
            }
        }
    }

    #[test]
    fn constant_sequence_has_zero_cauchy_gap() {
        let g = DirectedGraph::new(2, vec![(0, 1), (1, 0)]);
        let id = GraphHomomorphism::identity(&g);
        let seq = GraphSequence::new(vec![g.clone(), g.clone()], vec![id]).unwrap();
        let probes = default_probes(2, 2, 32, 3);
        let exp = TkExperiment::new(
            seq,
            vec![VelocityProfile::unit(2), VelocityProfile::unit(2)],
            2,
            vec![1, 2],
            vec![],
            vec![Complex64::new(1.0, 0.0)],
            probes,
            32,
            3,
            1.0,
        )
        .unwrap();
        let candidate = tk2_limit_candidate(&exp, Complex64::new(1.0, 0.0)).unwrap();
        assert!(candidate.cauchy_gap <= 1e-12);
    }

    #[test]
    fn cauchy_gap_shrinks_along_ladder() {
        let lambda = Complex64::new(2.0, 0.0);
        let gap_at = |top: usize| -> f64 {
            let exp = TkExperiment::ladder(top, 7, 32, vec![0.0], vec![lambda], 11).unwrap();
            tk2_limit_candidate(&exp, lambda).unwrap().cauchy_gap
        };
        let (g3, g4, g5) = (gap_at(3), gap_at(4), gap_at(5));
        assert!(g4 < g3 && g5 < g4, "gaps {} {} {}", g3, g4, g5);
    }

    #[test]
    fn range_density_zero_for_range_elements() {
        let exp = small_ladder_experiment();
        let lambda = Complex64::new(2.0, 0.0);
        let top = *exp.compare_indices().last().unwrap();
        let basis: Vec<_> = exp
            .probes()
            .iter()
            .map(|p| tk2_candidate_apply(&exp, lambda, top, &p.function).unwrap())
            .collect();
        // y already in the range: distance ~ solver tolerance.
        let y = basis[0].clone();
        let d = relative_distance_to_span(&basis, &y);
        assert!(d <= 1e-6, "distance {}", d);
    }

    #[test]
    fn insufficient_indices_error() {
        let exp =
            TkExperiment::ladder(1, 3, 32, vec![0.0], vec![Complex64::new(1.0, 0.0)], 9).unwrap();
        assert_eq!(
            tk2_limit_candidate(&exp, Complex64::new(1.0, 0.0)).unwrap_err(),
            TkError::InsufficientIndices { got: 1 }
        );
    }

    #[test]
    fn backward_difference_powers_converge() {
        let sys = FlowSystem::unit(DirectedGraph::new(2, vec![(0, 1), (1, 0)])).unwrap();
        let n = 128;
        let f = GridFunction::from_fn(2, n, |_, s| {
            1.0 + libm::sin(2.0 * core::f64::consts::PI * s)
        });
        let exact = evolve_exact(&sys, &f, 1.0).unwrap();
        let mut previous = f64::INFINITY;
        for &steps in &[4usize, 8, 16, 32] {
            let approx = tk2_semigroup_from_resolvent(&sys, 1e-9, 1.0, &f, steps).unwrap();
            let err = approx.l1_distance(&exact).unwrap();
            assert!(err < previous, "steps {}: {} !< {}", steps, err, previous);
            previous = err;
        }
    }

    #[test]
    fn single_backward_step_is_first_order_consistent() {
        let sys = FlowSystem::unit(DirectedGraph::new(2, vec![(0, 1), (1, 0)])).unwrap();
        let err_at = |n: usize| -> f64 {
            let f = GridFunction::from_fn(2, n, |_, s| {
                1.0 + libm::sin(2.0 * core::f64::consts::PI * s)
            });
            let t = 1.0 / n as f64;
            tk2_semigroup_from_resolvent(&sys, 1e-9, t, &f, 1)
                .unwrap()
                .l1_distance(&f)
                .unwrap()
        };
        let (e1, e2) = (err_at(64), err_at(128));
        assert!(e2 < e1 && e1 / e2 > 1.5, "{} vs {}", e1, e2);
        let sys2 = FlowSystem::unit(DirectedGraph::new(2, vec![(0, 1), (1, 0)])).unwrap();
        let zero = GridFunction::zeros(2, 32);
        let out = tk2_semigroup_from_resolvent(&sys2, 1e-9, 1.0, &zero, 8).unwrap();
        assert_eq!(out.l1_norm(), 0.0);
    }

    #[test]
    fn steps_below_base_rate_rejected() {
        let sys = FlowSystem::unit(DirectedGraph::new(2, vec![(0, 1), (1, 0)])).unwrap();
        let f = GridFunction::constant(2, 16, 1.0);
        assert!(matches!(
            tk2_semigroup_from_resolvent(&sys, 10.0, 1.0, &f, 4),
            Err(TkError::StepsBelowBase { .. })
        ));
    }

    #[test]
    fn spearman_handles_monotone_and_ties() {
        assert_eq!(
            spearman_rank_correlation(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]),
            1.0
        );
        assert_eq!(
            spearman_rank_correlation(&[1.0, 2.0, 3.0], &[30.0, 20.0, 10.0]),
            -1.0
        );
        let rho = spearman_rank_correlation(&[1.0, 1.0, 2.0], &[5.0, 5.0, 9.0]);
        assert!(rho > 0.99);
    }

    #[test]
    fn velocity_consistency_is_enforced() {
        let seq = ladder_sequence(2);
        let mut v2 = vec![1.0; 9];
        v2[0] = 2.0; // retained edge changes speed
        let err = TkExperiment::new(
            seq,
            vec![VelocityProfile::unit(5), VelocityProfile::new(v2).unwrap()],
            2,
            vec![1],
            vec![0.0],
            vec![],
            default_probes(9, 5, 16, 1),
            16,
            1,
            1.0,
        )
        .unwrap_err();
        assert_eq!(err, TkError::VelocityMismatch { n: 1, edge: 0 });
    }
}
