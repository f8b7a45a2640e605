use std::io::Write;
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use num_complex::Complex64;

use super::config::{Convection, Experiment, ExperimentConfig};
use super::HarnessError;
use crate::adaptivity::adaptive_multilevel;
use crate::baseline::direct_solve;
use crate::correction::{multilevel_solve, CorrectionOptions, EigenCluster};
use crate::fem::{self, assemble_pencil, build_space, Coefficients, ExactFn, FeSpace};
use crate::mesh::{generate_l_shape, generate_unit_square, refine_red, Domain, Mesh};
use crate::metrics::align_to_exact;
use crate::model;
use crate::smalleig::ClusterSelector;
use crate::sparse::CsrMatrix;

pub const CSV_COLUMNS: [&str; 14] = [
    "experiment",
    "level",
    "degree",
    "h",
    "dofs_fine",
    "dofs_small",
    "j",
    "lambda_re",
    "lambda_im",
    "err_lambda",
    "err_u_h1",
    "err_u_b",
    "err_uadj_h1",
    "wall_ms",
];

/// Mesh size of the reference solve that cross-checks complex eigenvalues.
const REFERENCE_CHECK_N: usize = 16;
const REFERENCE_CHECK_DEGREE: usize = 4;
const REFERENCE_CHECK_TOL: f64 = 1e-4;

/// One data row. Errors are `NaN` where no reference exists.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub experiment: String,
    pub level: usize,
    pub degree: usize,
    pub h: f64,
    pub dofs_fine: usize,
    pub dofs_small: usize,
    pub j: usize,
    pub lambda: Complex64,
    pub err_lambda: f64,
    pub err_u_h1: f64,
    pub err_u_b: f64,
    pub err_uadj_h1: f64,
    pub wall_ms: f64,
}

impl CsvRow {
    pub fn record(&self) -> Vec<String> {
        vec![
            self.experiment.clone(),
            self.level.to_string(),
            self.degree.to_string(),
            self.h.to_string(),
            self.dofs_fine.to_string(),
            self.dofs_small.to_string(),
            self.j.to_string(),
            self.lambda.re.to_string(),
            self.lambda.im.to_string(),
            self.err_lambda.to_string(),
            self.err_u_h1.to_string(),
            self.err_u_b.to_string(),
            self.err_uadj_h1.to_string(),
            self.wall_ms.to_string(),
        ]
    }
}

/// Result of a run. `failure` is set when a numerical step failed; rows
/// computed before the failure are kept.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: ExperimentConfig,
    pub metadata: Vec<String>,
    pub rows: Vec<CsvRow>,
    pub final_space: Option<Arc<FeSpace>>,
    pub failure: Option<String>,
}

/// Problem data and oracles derived from a configuration.
struct Problem {
    coeffs: Coefficients,
    /// Constant convection vector, when the field is constant.
    b: Option<[Complex64; 2]>,
    domain: Domain,
}

impl Problem {
    fn new(cfg: &ExperimentConfig) -> Self {
        let b = [Complex64::new(cfg.b_re[0], cfg.b_im[0]), Complex64::new(cfg.b_re[1], cfg.b_im[1])];
        match cfg.convection {
            Convection::Constant => Self { coeffs: model::square_coefficients(b), b: Some(b), domain: cfg.domain },
            Convection::Rotating => Self { coeffs: model::rotating_coefficients(), b: None, domain: cfg.domain },
        }
    }

    /// Closed-form spectrum available.
    fn has_exact(&self) -> bool {
        self.b.is_some() && self.domain == Domain::UnitSquare
    }

    fn mesh(&self, n: usize) -> Result<Arc<Mesh>, HarnessError> {
        match self.domain {
            Domain::UnitSquare => generate_unit_square(n),
            Domain::LShape => generate_l_shape(n),
        }
        .map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Reference eigenvalue of global index `j` (1-based).
    fn reference(&self, j: usize) -> Option<Complex64> {
        let b = self.b?;
        match self.domain {
            Domain::UnitSquare => Some(model::first_eigenvalues(b, j)[j - 1]),
            Domain::LShape if j == 1 && b == model::real_b() => Some(Complex64::new(model::LSHAPE_REFERENCE, 0.0)),
            Domain::LShape => None,
        }
    }

    fn eigenfunctions(&self, first: usize, count: usize) -> Option<(Vec<ExactFn>, Vec<ExactFn>)> {
        if !self.has_exact() {
            return None;
        }
        let b = self.b?;
        let pairs = model::mode_pairs(first + count - 1);
        let modes = &pairs[first - 1..];
        Some((
            modes.iter().map(|&(k, l)| model::eigenfunction(b, k, l)).collect(),
            modes.iter().map(|&(k, l)| model::adjoint_eigenfunction(b, k, l)).collect(),
        ))
    }

    /// Split the requested index range into clusters. With a closed-form
    /// spectrum every degenerate eigenvalue is one cluster.
    fn clusters(&self, first: usize, count: usize) -> Result<Vec<(usize, usize)>, HarnessError> {
        if !self.has_exact() {
            return Ok(vec![(first, count)]);
        }
        let pairs = model::mode_pairs(first + count);
        let key = |j: usize| pairs[j - 1].0.pow(2) + pairs[j - 1].1.pow(2);
        if first > 1 && key(first - 1) == key(first) {
            return Err(HarnessError::Config(format!("eigenvalue {first} is the second member of a degenerate pair")));
        }
        if key(first + count - 1) == key(first + count) {
            return Err(HarnessError::Config(format!("eigenvalue {} is the first member of a degenerate pair", first + count - 1)));
        }
        let mut out = Vec::new();
        let mut start = first;
        for j in first + 1..=first + count {
            if j == first + count || key(j) != key(start) {
                out.push((start, j - start));
                start = j;
            }
        }
        Ok(out)
    }
}

struct LevelData<'a> {
    level: usize,
    h: f64,
    dofs_small: usize,
    wall_ms: f64,
    cluster: &'a EigenCluster,
}

fn nan() -> f64 {
    f64::NAN
}

fn level_rows(cfg: &ExperimentConfig, problem: &Problem, first: usize, d: &LevelData<'_>) -> Result<Vec<CsvRow>, HarnessError> {
    let c = d.cluster;
    let degree = c.space.degree();
    let quad = fem::default_error_quadrature(degree);
    let (primal_err, adjoint_err) = match problem.eigenfunctions(first, c.m()) {
        Some((u, u_adj)) => {
            let p = align_to_exact(&c.space, &c.primal, &u, quad).map_err(|e| HarnessError::Numerical(e.to_string()))?;
            let a = align_to_exact(&c.space, &c.adjoint, &u_adj, quad).map_err(|e| HarnessError::Numerical(e.to_string()))?;
            (Some(p), Some(a))
        }
        None => (None, None),
    };
    Ok((0..c.m())
        .map(|k| {
            let j = first + k;
            CsvRow {
                experiment: cfg.experiment.name().to_string(),
                level: d.level,
                degree,
                h: d.h,
                dofs_fine: c.space.num_interior(),
                dofs_small: d.dofs_small,
                j,
                lambda: c.lambdas[k],
                err_lambda: problem.reference(j).map_or(nan(), |r| (c.lambdas[k] - r).norm()),
                err_u_h1: primal_err.as_ref().map_or(nan(), |e| e[k].h1),
                err_u_b: primal_err.as_ref().map_or(nan(), |e| e[k].b),
                err_uadj_h1: adjoint_err.as_ref().map_or(nan(), |e| e[k].h1),
                wall_ms: d.wall_ms,
            }
        })
        .collect())
}

fn ladder(coarse: &Arc<Mesh>, levels: usize) -> Vec<Arc<Mesh>> {
    let mut meshes = vec![Arc::clone(coarse)];
    for _ in 1..levels {
        let next = refine_red(meshes.last().expect("nonempty"));
        meshes.push(next);
    }
    meshes
}

type Plan = Vec<(Arc<Mesh>, usize)>;

/// Plans of `(mesh, degree)` levels: one per mesh size for a degree ladder,
/// a single refinement ladder otherwise.
fn plans(cfg: &ExperimentConfig, problem: &Problem) -> Result<Vec<Plan>, HarnessError> {
    let degree_ladder = cfg.experiment == Experiment::MultiSpace || (cfg.experiment == Experiment::DirectBaseline && cfg.degrees.len() > 1);
    if degree_ladder {
        cfg.mesh_sizes
            .iter()
            .map(|&n| {
                let m = problem.mesh(n)?;
                Ok(cfg.degrees.iter().map(|&p| (Arc::clone(&m), p)).collect())
            })
            .collect()
    } else {
        let coarse = problem.mesh(cfg.coarse_n)?;
        Ok(vec![ladder(&coarse, cfg.levels).into_iter().map(|m| (m, cfg.degrees[0])).collect()])
    }
}

fn numerical(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Numerical(e.to_string())
}

struct Runner<'a> {
    cfg: &'a ExperimentConfig,
    problem: Problem,
    opts: CorrectionOptions,
    out: RunOutput,
}

impl Runner<'_> {
    fn multilevel(&mut self) -> Result<(), HarnessError> {
        let plans = plans(self.cfg, &self.problem)?;
        for (first, count) in self.problem.clusters(self.cfg.target_index, self.cfg.cluster_count)? {
            for plan in &plans {
                let (_, history) = multilevel_solve(&self.problem.coeffs, plan, &ClusterSelector::new(first, count), 0, &self.opts).map_err(numerical)?;
                for r in &history {
                    for w in &r.warnings {
                        self.out.metadata.push(format!("warning: level {} h {} cluster {first}: {w}", r.level, r.h));
                    }
                    let d = LevelData { level: r.level, h: r.h, dofs_small: r.dofs_small, wall_ms: r.wall_ms, cluster: &r.cluster };
                    let rows = level_rows(self.cfg, &self.problem, first, &d)?;
                    self.out.rows.extend(rows);
                }
                self.out.final_space = history.last().map(|r| Arc::clone(&r.cluster.space));
            }
        }
        Ok(())
    }

    fn baseline(&mut self) -> Result<(), HarnessError> {
        let plans = plans(self.cfg, &self.problem)?;
        for (first, count) in self.problem.clusters(self.cfg.target_index, self.cfg.cluster_count)? {
            for plan in &plans {
                for (k, (mesh, p)) in plan.iter().enumerate() {
                    let start = Instant::now();
                    let space = build_space(mesh, *p).map_err(numerical)?;
                    let c = direct_solve(&space, &self.problem.coeffs, &ClusterSelector::new(first, count), self.cfg.quad_degree).map_err(numerical)?;
                    let d = LevelData { level: k + 1, h: mesh.h(), dofs_small: space.num_interior(), wall_ms: start.elapsed().as_secs_f64() * 1e3, cluster: &c };
                    let rows = level_rows(self.cfg, &self.problem, first, &d)?;
                    self.out.rows.extend(rows);
                    self.out.final_space = Some(space);
                }
            }
        }
        Ok(())
    }

    fn adaptive(&mut self) -> Result<(), HarnessError> {
        let initial = self.problem.mesh(self.cfg.coarse_n)?;
        for (first, count) in self.problem.clusters(self.cfg.target_index, self.cfg.cluster_count)? {
            let history = adaptive_multilevel(&self.problem.coeffs, &initial, &ClusterSelector::new(first, count), self.cfg.theta, self.cfg.levels, &self.opts)
                .map_err(numerical)?;
            for r in &history {
                for w in &r.warnings {
                    self.out.metadata.push(format!("warning: iteration {} cluster {first}: {w}", r.iteration));
                }
                let d = LevelData { level: r.iteration + 1, h: r.mesh().h(), dofs_small: r.dofs_small, wall_ms: r.wall_ms, cluster: &r.cluster };
                let rows = level_rows(self.cfg, &self.problem, first, &d)?;
                self.out.rows.extend(rows);
            }
            self.out.final_space = history.last().map(|r| Arc::clone(&r.cluster.space));
        }
        Ok(())
    }

    /// Compare the closed-form eigenvalues with a high-order direct solve.
    fn reference_check(&mut self) -> Result<(), HarnessError> {
        if !self.problem.has_exact() {
            return Ok(());
        }
        let mesh = self.problem.mesh(REFERENCE_CHECK_N.max(self.cfg.coarse_n))?;
        let space = build_space(&mesh, REFERENCE_CHECK_DEGREE).map_err(numerical)?;
        for (first, count) in self.problem.clusters(self.cfg.target_index, self.cfg.cluster_count)? {
            let c = direct_solve(&space, &self.problem.coeffs, &ClusterSelector::new(first, count), None).map_err(numerical)?;
            for (k, lambda) in c.lambdas.iter().enumerate() {
                let j = first + k;
                let formula = self.problem.reference(j).expect("closed form available");
                let diff = (lambda - formula).norm();
                self.out.metadata.push(format!(
                    "reference_check j = {j}: formula = {} {:+}i, direct P{REFERENCE_CHECK_DEGREE} h = 1/{} = {} {:+}i, difference = {diff:e}",
                    formula.re,
                    formula.im,
                    REFERENCE_CHECK_N.max(self.cfg.coarse_n),
                    lambda.re,
                    lambda.im
                ));
                if !(diff <= REFERENCE_CHECK_TOL) {
                    return Err(HarnessError::Numerical(format!(
                        "closed-form and direct reference for eigenvalue {j} differ by {diff:e} (tolerance {REFERENCE_CHECK_TOL:e})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Run an experiment. Numerical failures are reported in
/// [`RunOutput::failure`]; configuration problems are errors.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    let problem = Problem::new(cfg);
    // validate the cluster split before any work
    problem.clusters(cfg.target_index, cfg.cluster_count)?;
    let opts = CorrectionOptions { quad_degree: cfg.quad_degree, ..CorrectionOptions::default() };
    let mut metadata: Vec<String> = cfg.to_lines().into_iter().map(|l| format!("config: {l}")).collect();
    let degrees: Vec<usize> = if cfg.experiment == Experiment::ComplexB { vec![cfg.degrees[0], REFERENCE_CHECK_DEGREE] } else { cfg.degrees.clone() };
    for p in degrees {
        metadata.push(format!("quadrature: degree {p} assembly {} error {}", opts.quad_for(p), fem::default_error_quadrature(p)));
    }
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0);
    metadata.push(format!("started_unix_ms: {started}"));
    let mut runner = Runner {
        cfg,
        problem,
        opts,
        out: RunOutput { config: cfg.clone(), metadata, rows: Vec::new(), final_space: None, failure: None },
    };
    let start = Instant::now();
    let result = match cfg.experiment {
        Experiment::MultiSpace | Experiment::MultiGrid => runner.multilevel(),
        Experiment::ComplexB => runner.reference_check().and_then(|_| runner.multilevel()),
        Experiment::DirectBaseline => runner.baseline(),
        Experiment::LShapeAdaptive => runner.adaptive(),
    };
    let mut out = runner.out;
    match result {
        Ok(()) => {}
        Err(HarnessError::Numerical(m)) => out.failure = Some(m),
        Err(e) => return Err(e),
    }
    out.metadata.push(format!("wall_ms_total: {:.3}", start.elapsed().as_secs_f64() * 1e3));
    Ok(out)
}

/// Interior stiffness matrix `A` of the final space of a run.
pub fn final_matrix(out: &RunOutput) -> Result<Option<CsrMatrix>, HarnessError> {
    let Some(space) = &out.final_space else { return Ok(None) };
    let opts = CorrectionOptions { quad_degree: out.config.quad_degree, ..CorrectionOptions::default() };
    let pencil = assemble_pencil(space, &Problem::new(&out.config).coeffs, opts.quad_for(space.degree())).map_err(numerical)?;
    Ok(Some(pencil.a))
}

/// Metadata lines (`# ...`), the column header and one line per row. A
/// failure is appended as a final `# error: ...` line.
pub fn write_csv<W: Write>(out: &RunOutput, mut w: W) -> Result<(), HarnessError> {
    for line in &out.metadata {
        writeln!(w, "# {line}")?;
    }
    {
        let mut csv = csv::Writer::from_writer(&mut w);
        csv.write_record(CSV_COLUMNS).map_err(|e| HarnessError::Io(e.into()))?;
        for row in &out.rows {
            csv.write_record(row.record()).map_err(|e| HarnessError::Io(e.into()))?;
        }
        csv.flush()?;
    }
    if let Some(f) = &out.failure {
        writeln!(w, "# error: {f}")?;
    }
    Ok(())
}
