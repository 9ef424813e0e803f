//! Config-driven experiment pipeline: problem generation, hybrid MAP
//! estimation, posterior sampling and diagnostics, each writing into a fixed
//! directory layout under the output directory:
//!
//! ```text
//! <output>/problem/            manifest.json, A_hat.csv, b_hat.csv
//! <output>/map/<r>/            map.json, map.csv
//! <output>/chains/<run_id>/    samples.csv, meta.json, physical.csv
//! <output>/reports/<run_id>/   report.json and one CSV per figure type
//! ```

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use log::{info, warn};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    build_report, histogram, threshold_delta, DiagnosticsReport, ReportConfig,
};
use crate::error::{Error, Result};
use crate::forward::{build_problem, cumulative, DeconvolutionConfig, GroundTruth, InverseProblem};
use crate::hypermodel::{match_hyperparameters, Hypermodel};
use crate::ias::{hybrid_run, HybridResult, HybridSchedule, IasResult};
use crate::io::{self, indexed, Table};
use crate::sampler::{
    run_chain, samples_to_physical, to_reparam, ChainConfig, KernelKind, PosteriorPotential,
    Potential, ReparamPoint, SampleSet,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub beta1: f64,
    pub vartheta1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MapSettings {
    fn default() -> Self {
        MapSettings {
            tol: crate::ias::DEFAULT_TOL,
            max_iter: crate::ias::DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub id: String,
    pub r: f64,
    pub kernel: KernelKind,
    pub h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    pub total_steps: u64,
    pub thin: u64,
    pub seed: u64,
}

impl RunSpec {
    pub fn chain_config(&self) -> ChainConfig {
        ChainConfig {
            kernel: self.kernel,
            h: self.h,
            k: self.k,
            total_steps: self.total_steps,
            thin: self.thin,
            seed: self.seed,
        }
    }
}

fn default_probes() -> Vec<usize> {
    vec![30, 50]
}

fn default_level() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: DeconvolutionConfig,
    pub reference: Reference,
    #[serde(default)]
    pub map: MapSettings,
    pub runs: Vec<RunSpec>,
    pub output_dir: PathBuf,
    pub lags: usize,
    #[serde(default = "default_probes")]
    pub probes: Vec<usize>,
    #[serde(default = "default_level")]
    pub level: f64,
}

impl ExperimentConfig {
    /// The four-hypermodel benchmark at desk scale (10⁶ steps, thin 100).
    pub fn benchmark(output_dir: impl Into<PathBuf>) -> Self {
        let run = |id: &str, r: f64, kernel, h: f64, k: Option<f64>, seed| RunSpec {
            id: id.to_string(),
            r,
            kernel,
            h,
            k,
            total_steps: 1_000_000,
            thin: 100,
            seed,
        };
        ExperimentConfig {
            problem: DeconvolutionConfig::default(),
            reference: Reference {
                beta1: 1.501,
                vartheta1: 0.05,
            },
            map: MapSettings::default(),
            runs: vec![
                run("gamma_h005", 1.0, KernelKind::Pcn, 0.05, None, 101),
                run("gamma_h002", 1.0, KernelKind::Pcn, 0.02, None, 102),
                run("half_h003", 0.5, KernelKind::Pcn, 0.03, None, 103),
                run("neghalf_h0008", -0.5, KernelKind::Pcn, 0.008, None, 104),
                run("invgamma_pcn_h002", -1.0, KernelKind::Pcn, 0.02, None, 105),
                run(
                    "invgamma_radial",
                    -1.0,
                    KernelKind::RadialPcn,
                    0.001,
                    Some(0.05),
                    106,
                ),
            ],
            output_dir: output_dir.into(),
            lags: 100,
            probes: default_probes(),
            level: default_level(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg: ExperimentConfig = io::read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        self.reference_model()?;
        let mut ids = HashSet::new();
        let mut seeds = HashSet::new();
        for run in &self.runs {
            if run.id.is_empty()
                || !run
                    .id
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            {
                return Err(Error::Config(format!(
                    "run id {:?} must be non-empty and use [A-Za-z0-9_-]",
                    run.id
                )));
            }
            if !ids.insert(run.id.as_str()) {
                return Err(Error::Config(format!("duplicate run id {:?}", run.id)));
            }
            if !seeds.insert(run.seed) {
                return Err(Error::Config(format!(
                    "run {:?} reuses seed {}",
                    run.id, run.seed
                )));
            }
            run.chain_config().validate()?;
            self.hypermodel_for(run.r)?;
        }
        if let Some(&p) = self.probes.iter().find(|&&p| p == 0 || p > self.problem.n) {
            return Err(Error::Config(format!(
                "probe index {p} outside 1..={}",
                self.problem.n
            )));
        }
        if !(0.0..1.0).contains(&self.level) {
            return Err(Error::Config(format!(
                "envelope level must lie in [0, 1), got {}",
                self.level
            )));
        }
        if !(self.map.tol > 0.0) || self.map.max_iter == 0 {
            return Err(Error::Config(
                "map tol and max_iter must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn reference_model(&self) -> Result<Hypermodel> {
        Hypermodel::new(1.0, self.reference.beta1, self.reference.vartheta1)
    }

    /// The reference model for r = 1, otherwise the matched model.
    pub fn hypermodel_for(&self, r: f64) -> Result<Hypermodel> {
        if r == 1.0 {
            self.reference_model()
        } else {
            match_hyperparameters(r, self.reference.beta1, self.reference.vartheta1)
        }
    }

    pub fn run(&self, id: &str) -> Result<&RunSpec> {
        self.runs
            .iter()
            .find(|r| r.id == id)
            .ok_or_else(|| Error::Config(format!("no run with id {id:?} in config")))
    }

    /// Distinct r values of the runs in first-appearance order.
    pub fn distinct_r(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for run in &self.runs {
            if !out.contains(&run.r) {
                out.push(run.r);
            }
        }
        out
    }

    /// Override the data seed and derive distinct chain seeds from `seed`.
    pub fn apply_seed_override(&mut self, seed: u64) {
        self.problem.rng_seed = seed;
        for (i, run) in self.runs.iter_mut().enumerate() {
            run.seed = seed.wrapping_add(1 + i as u64);
        }
    }

    pub fn delta(&self) -> f64 {
        threshold_delta(self.reference.beta1, self.reference.vartheta1)
    }
}

/// Directory label of a shape exponent, e.g. `1`, `0.5`, `-1`.
pub fn r_label(r: f64) -> String {
    format!("{r}")
}

pub fn problem_dir(out: &Path) -> PathBuf {
    out.join("problem")
}

pub fn map_dir(out: &Path, r: f64) -> PathBuf {
    out.join("map").join(r_label(r))
}

pub fn chain_dir(out: &Path, id: &str) -> PathBuf {
    out.join("chains").join(id)
}

pub fn report_dir(out: &Path, id: &str) -> PathBuf {
    out.join("reports").join(id)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemManifest {
    pub config: DeconvolutionConfig,
    pub n: usize,
    pub m: usize,
    pub sigma: f64,
    pub a_hat_file: String,
    pub b_hat_file: String,
    pub ground_truth: GroundTruth,
}

/// Write the problem manifest and the whitened matrix and data.
pub fn cmd_generate(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let (prob, truth) = build_problem(&cfg.problem)?;
    let dir = problem_dir(&cfg.output_dir);
    io::ensure_dir(&dir)?;

    let mut a = Table::new(indexed("col", prob.n()));
    for j in 0..prob.m() {
        let row: Vec<f64> = prob.a_hat().row(j).iter().copied().collect();
        a.push(&row);
    }
    let mut b = Table::new(vec!["b_hat".into()]);
    for v in prob.b_hat().iter() {
        b.push(&[*v]);
    }
    let manifest = ProblemManifest {
        config: cfg.problem.clone(),
        n: prob.n(),
        m: prob.m(),
        sigma: prob.sigma(),
        a_hat_file: "A_hat.csv".into(),
        b_hat_file: "b_hat.csv".into(),
        ground_truth: truth,
    };
    io::write_table(&dir.join(&manifest.a_hat_file), &a)?;
    io::write_table(&dir.join(&manifest.b_hat_file), &b)?;
    io::write_json(&dir.join("manifest.json"), &manifest)?;
    info!("problem written to {}", dir.display());
    Ok(dir)
}

pub fn load_problem(out: &Path) -> Result<(InverseProblem, ProblemManifest)> {
    let dir = problem_dir(out);
    let manifest_path = dir.join("manifest.json");
    if !manifest_path.exists() {
        return Err(Error::MissingArtifact {
            path: manifest_path,
            hint: "run `hierbayes generate` first".into(),
        });
    }
    let manifest: ProblemManifest = io::read_json(&manifest_path)?;
    let a_path = dir.join(&manifest.a_hat_file);
    let a = io::read_table(&a_path)?;
    if a.rows != manifest.m || a.cols() != manifest.n {
        return Err(Error::parse(
            &a_path,
            format!(
                "expected {}x{} matrix, found {}x{}",
                manifest.m,
                manifest.n,
                a.rows,
                a.cols()
            ),
        ));
    }
    let b_path = dir.join(&manifest.b_hat_file);
    let b = io::read_table(&b_path)?;
    if b.rows != manifest.m || b.cols() != 1 {
        return Err(Error::parse(
            &b_path,
            format!("expected {} data values", manifest.m),
        ));
    }
    let prob = InverseProblem::new(
        DMatrix::from_row_slice(manifest.m, manifest.n, &a.data),
        DVector::from_vec(b.data),
        manifest.sigma,
    )?;
    Ok((prob, manifest))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub hypermodel: Hypermodel,
    pub iterations: usize,
    pub converged: bool,
    pub energy_trace: Vec<f64>,
    pub rel_change_trace: Vec<f64>,
}

impl From<&IasResult> for PhaseSummary {
    fn from(r: &IasResult) -> Self {
        PhaseSummary {
            hypermodel: r.hypermodel.clone(),
            iterations: r.iterations(),
            converged: r.converged,
            energy_trace: r.trace.iter().map(|s| s.energy).collect(),
            rel_change_trace: r.trace.iter().map(|s| s.rel_change).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapRecord {
    pub r: f64,
    pub hypermodel: Hypermodel,
    pub converged: bool,
    pub phase1: PhaseSummary,
    pub phase2: Option<PhaseSummary>,
}

/// Final MAP point of a hybrid run in all coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct MapPoint {
    pub xi: Vec<f64>,
    pub lambda: Vec<f64>,
    pub x: Vec<f64>,
    pub theta: Vec<f64>,
    pub z: Vec<f64>,
}

impl MapPoint {
    pub fn from_result(res: &IasResult) -> Self {
        let last = res.last();
        let x = res.x();
        MapPoint {
            xi: last.xi.clone(),
            lambda: last.lambda.clone(),
            theta: res.theta(),
            z: cumulative(&x),
            x,
        }
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(
            ["j", "xi", "lambda", "x", "theta", "z"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        );
        for j in 0..self.xi.len() {
            t.push(&[
                (j + 1) as f64,
                self.xi[j],
                self.lambda[j],
                self.x[j],
                self.theta[j],
                self.z[j],
            ]);
        }
        t
    }

    pub fn from_table(t: &Table, path: &Path) -> Result<Self> {
        let col = |name: &str| {
            t.column(name)
                .ok_or_else(|| Error::parse(path, format!("missing column {name:?}")))
        };
        Ok(MapPoint {
            xi: col("xi")?,
            lambda: col("lambda")?,
            x: col("x")?,
            theta: col("theta")?,
            z: col("z")?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct MapOutcome {
    pub record: MapRecord,
    pub point: MapPoint,
    pub result: HybridResult,
}

/// Hybrid MAP estimate for shape exponent `r`: phase I with the reference
/// gamma model, phase II with the matched model when `r != 1`.
pub fn cmd_map(cfg: &ExperimentConfig, r: f64) -> Result<MapOutcome> {
    let (prob, _) = load_problem(&cfg.output_dir)?;
    let phase1 = cfg.reference_model()?;
    let phase2 = if r == 1.0 {
        None
    } else {
        let hm = cfg.hypermodel_for(r)?;
        info!(
            "matched hypermodel for r = {r}: beta = {:.6}, vartheta = {:.6e}",
            hm.beta(),
            hm.vartheta(0)
        );
        Some(hm)
    };
    let schedule = HybridSchedule {
        phase1,
        phase2,
        tol: cfg.map.tol,
        max_iter: cfg.map.max_iter,
    };
    let result = hybrid_run(&prob, &schedule)?;
    let last = result.final_result();
    let record = MapRecord {
        r,
        hypermodel: last.hypermodel.clone(),
        converged: result.converged(),
        phase1: (&result.phase1).into(),
        phase2: result.phase2.as_ref().map(PhaseSummary::from),
    };
    let point = MapPoint::from_result(last);
    let dir = map_dir(&cfg.output_dir, r);
    io::write_json(&dir.join("map.json"), &record)?;
    io::write_table(&dir.join("map.csv"), &point.to_table())?;
    if !record.converged {
        warn!("IAS for r = {r} stopped at the iteration cap without converging");
    }
    Ok(MapOutcome {
        record,
        point,
        result,
    })
}

pub fn load_map(out: &Path, r: f64) -> Result<(MapRecord, MapPoint)> {
    let dir = map_dir(out, r);
    let csv = dir.join("map.csv");
    let json = dir.join("map.json");
    if !csv.exists() || !json.exists() {
        return Err(Error::MissingArtifact {
            path: dir,
            hint: format!("run `hierbayes map` for r = {r} first"),
        });
    }
    let record: MapRecord = io::read_json(&json)?;
    let point = MapPoint::from_table(&io::read_table(&csv)?, &csv)?;
    Ok((record, point))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainMeta {
    pub run_id: String,
    pub r: f64,
    pub hypermodel: Hypermodel,
    pub config: ChainConfig,
    pub n: usize,
    pub stored_draws: usize,
    pub accept_count: u64,
    pub total_proposals: u64,
    pub acceptance_rate: f64,
    pub init_provenance: String,
    pub init: ReparamPoint,
}

fn sample_table(set: &SampleSet) -> Table {
    let mut header = indexed("v", set.n);
    header.extend(indexed("tau", set.n));
    let mut t = Table::new(header);
    for i in 0..set.stored() {
        t.push(set.row(i));
    }
    t
}

/// Run the chain of `run_id` from the MAP point of its `r`.
pub fn cmd_sample(cfg: &ExperimentConfig, run_id: &str) -> Result<(SampleSet, ChainMeta)> {
    let run = cfg.run(run_id)?;
    let (prob, _) = load_problem(&cfg.output_dir)?;
    let (_, map) = load_map(&cfg.output_dir, run.r)?;
    let hm = cfg.hypermodel_for(run.r)?;
    let init = to_reparam(&map.xi, &map.lambda, run.r)?;
    let pot = PosteriorPotential::new(&prob, &hm)?;
    let set = run_chain(&init, &run.chain_config(), &pot)?;
    info!(
        "run {run_id}: {} proposals, acceptance {:.4}%",
        set.total_proposals,
        100.0 * set.acceptance_rate()
    );
    let meta = ChainMeta {
        run_id: run.id.clone(),
        r: run.r,
        hypermodel: hm.clone(),
        config: set.config.clone(),
        n: set.n,
        stored_draws: set.stored(),
        accept_count: set.accept_count,
        total_proposals: set.total_proposals,
        acceptance_rate: set.acceptance_rate(),
        init_provenance: format!("map/{}/map.csv", r_label(run.r)),
        init: init.clone(),
    };
    let dir = chain_dir(&cfg.output_dir, run_id);
    io::write_table(&dir.join("samples.csv"), &sample_table(&set))?;
    io::write_json(&dir.join("meta.json"), &meta)?;

    let scales = hm.scales_for(set.n)?;
    let phys = samples_to_physical(&set, &scales, run.r)?;
    let mut header = indexed("x", set.n);
    header.extend(indexed("theta", set.n));
    header.extend(indexed("z", set.n));
    header.push("excluded".into());
    let mut t = Table::new(header);
    let mut row = Vec::with_capacity(3 * set.n + 1);
    for i in 0..phys.len() {
        row.clear();
        row.extend_from_slice(phys.x_row(i));
        row.extend_from_slice(phys.theta_row(i));
        row.extend_from_slice(phys.z_row(i));
        row.push(if phys.excluded[i] { 1.0 } else { 0.0 });
        t.push(&row);
    }
    io::write_table(&dir.join("physical.csv"), &t)?;
    Ok((set, meta))
}

/// Read a stored chain back; Φ values are recomputed from the problem.
pub fn load_chain(cfg: &ExperimentConfig, run_id: &str) -> Result<(SampleSet, ChainMeta)> {
    let dir = chain_dir(&cfg.output_dir, run_id);
    let meta_path = dir.join("meta.json");
    let samples_path = dir.join("samples.csv");
    if !meta_path.exists() || !samples_path.exists() {
        return Err(Error::MissingArtifact {
            path: dir,
            hint: format!("run `hierbayes sample --run {run_id}` first"),
        });
    }
    let meta: ChainMeta = io::read_json(&meta_path)?;
    let table = io::read_table(&samples_path)?;
    if table.cols() != 2 * meta.n {
        return Err(Error::parse(
            &samples_path,
            format!("expected {} columns, found {}", 2 * meta.n, table.cols()),
        ));
    }
    let (prob, _) = load_problem(&cfg.output_dir)?;
    let pot = PosteriorPotential::new(&prob, &meta.hypermodel)?;
    let n = meta.n;
    let phi = (0..table.rows)
        .map(|i| {
            let row = table.row(i);
            pot.eval(&row[..n], &row[n..])
        })
        .collect();
    let set = SampleSet {
        config: meta.config.clone(),
        init: meta.init.clone(),
        n,
        draws: table.data,
        phi,
        accept_count: meta.accept_count,
        total_proposals: meta.total_proposals,
    };
    Ok((set, meta))
}

const PAIR_BINS: usize = 50;

/// Diagnostics of one stored chain. Nothing is written unless every
/// summary could be computed.
pub fn cmd_diagnose(cfg: &ExperimentConfig, run_id: &str) -> Result<DiagnosticsReport> {
    cfg.run(run_id)?;
    let (set, meta) = load_chain(cfg, run_id)?;
    if set.stored() == 0 {
        return Err(Error::Invalid(format!("run {run_id} has no stored draws")));
    }
    let n = set.n;
    if let Some(&p) = cfg.probes.iter().find(|&&p| p == 0 || p > n) {
        return Err(Error::Config(format!("probe index {p} outside 1..={n}")));
    }
    let scales = meta.hypermodel.scales_for(n)?;
    let phys = samples_to_physical(&set, &scales, meta.r)?;
    let report = build_report(
        &set,
        &phys,
        &ReportConfig {
            max_lag: cfg.lags,
            probes: cfg.probes.clone(),
            level: cfg.level,
            delta: cfg.delta(),
        },
    )?;
    for w in &report.warnings {
        warn!("run {run_id}: {w}");
    }

    let mut acf_header = vec!["lag".to_string()];
    for p in &report.probes {
        for name in ["x", "theta", "x_literal", "theta_literal"] {
            acf_header.push(format!("{name}_{}", p.index));
        }
    }
    let mut acf = Table::new(acf_header);
    for lag in 0..=report.max_lag {
        let mut row = vec![lag as f64];
        for p in &report.probes {
            row.extend([
                p.x[lag],
                p.theta[lag],
                p.x_literal[lag],
                p.theta_literal[lag],
            ]);
        }
        acf.push(&row);
    }

    let nodes = cfg.problem.nodes();
    let mut env = Table::new(
        [
            "j",
            "s",
            "z_lo",
            "z_mean",
            "z_hi",
            "x_lo",
            "x_mean",
            "x_hi",
            "theta_lo",
            "theta_mean",
            "theta_hi",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
    );
    for j in 0..n {
        let s = nodes.get(j).copied().unwrap_or(f64::NAN);
        env.push(&[
            (j + 1) as f64,
            s,
            report.envelope_z.lo[j],
            report.envelope_z.mean[j],
            report.envelope_z.hi[j],
            report.envelope_x.lo[j],
            report.envelope_x.mean[j],
            report.envelope_x.hi[j],
            report.envelope_theta.lo[j],
            report.envelope_theta.mean[j],
            report.envelope_theta.hi[j],
        ]);
    }

    let mut comp = Table::new(vec!["count".into(), "frequency".into()]);
    for (k, &c) in report.compress_histogram.iter().enumerate() {
        comp.push(&[k as f64, c as f64]);
    }

    let mut pair_header = vec!["draw".to_string()];
    for &p in &cfg.probes {
        pair_header.push(format!("tau_{p}"));
        pair_header.push(format!("v_{p}"));
    }
    let mut pairs = Table::new(pair_header);
    for i in 0..set.stored() {
        let mut row = vec![(i + 1) as f64];
        for &p in &cfg.probes {
            row.push(set.tau(i)[p - 1]);
            row.push(set.v(i)[p - 1]);
        }
        pairs.push(&row);
    }

    let mut hist_header = vec!["bin".to_string()];
    let mut hists = Vec::new();
    for &p in &cfg.probes {
        for (name, vals) in [
            (
                "tau",
                (0..set.stored())
                    .map(|i| set.tau(i)[p - 1])
                    .collect::<Vec<_>>(),
            ),
            ("v", (0..set.stored()).map(|i| set.v(i)[p - 1]).collect()),
        ] {
            for part in ["lo", "hi", "count"] {
                hist_header.push(format!("{name}_{p}_{part}"));
            }
            hists.push(histogram(&vals, PAIR_BINS));
        }
    }
    let mut pair_hist = Table::new(hist_header);
    for b in 0..PAIR_BINS {
        let mut row = vec![(b + 1) as f64];
        for (edges, counts) in &hists {
            let (lo, hi, c) = match counts.get(b) {
                Some(&c) => (edges[b], edges[b + 1], c as f64),
                None => (f64::NAN, f64::NAN, 0.0),
            };
            row.extend([lo, hi, c]);
        }
        pair_hist.push(&row);
    }

    let dir = report_dir(&cfg.output_dir, run_id);
    io::write_json(&dir.join("report.json"), &report)?;
    io::write_table(&dir.join("autocorr.csv"), &acf)?;
    io::write_table(&dir.join("envelopes.csv"), &env)?;
    io::write_table(&dir.join("compressibility.csv"), &comp)?;
    io::write_table(&dir.join("scatter_pairs.csv"), &pairs)?;
    io::write_table(&dir.join("pair_histograms.csv"), &pair_hist)?;
    info!(
        "run {run_id}: delta = {:.6}, compressibility mode = {}",
        report.delta, report.compress_mode
    );
    Ok(report)
}

/// Outcome of the whole pipeline.
#[derive(Debug, Clone)]
pub struct PipelineSummary {
    pub maps: Vec<MapRecord>,
    pub reports: Vec<(String, DiagnosticsReport)>,
}

impl PipelineSummary {
    pub fn all_converged(&self) -> bool {
        self.maps.iter().all(|m| m.converged)
    }
}

/// generate, map for every r in the run list, then sample and diagnose all
/// runs, one thread per run.
pub fn cmd_all(cfg: &ExperimentConfig) -> Result<PipelineSummary> {
    cmd_generate(cfg)?;
    let maps = cfg
        .distinct_r()
        .into_iter()
        .map(|r| cmd_map(cfg, r).map(|o| o.record))
        .collect::<Result<Vec<_>>>()?;
    let reports = std::thread::scope(|scope| {
        let handles: Vec<_> = cfg
            .runs
            .iter()
            .map(|run| {
                scope.spawn(move || -> Result<(String, DiagnosticsReport)> {
                    cmd_sample(cfg, &run.id)?;
                    Ok((run.id.clone(), cmd_diagnose(cfg, &run.id)?))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("run thread panicked"))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(PipelineSummary { maps, reports })
}

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } | Error::MissingArtifact { .. } => EXIT_IO,
        _ => EXIT_VALIDATION,
    }
}
