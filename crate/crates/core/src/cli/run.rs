//! Subcommand runners. Each builds every artifact in memory.

use num_complex::Complex64;

use super::config::*;
use crate::constants::{coherence_length, coherence_length_for_gap, PhysicalConstants};
use crate::decoherence::{apply_superselection, pair_factors};
use crate::density::{BasisLabel, DensityMatrix, FactorMatrix};
use crate::error::{Error, Result};
use crate::fel::{evaluate_preset, steady_state};
use crate::lattice::{code_lattice, preset_field, rewrite, stats, BoundaryField, LatticeSpec};
use crate::mean_field::{
    hamiltonian, integrate_with, make_modes, resonant_pair, saturating_amplitude, stationary_state,
    MeanFieldState, VevAnsatz,
};
use crate::measurement::run_pipeline;
use crate::numeric::{fmt_f64, linear_grid, norm, Vec3};
use crate::phase::{phase_diagram, QuasiParticleSpec};

/// A named output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: Vec<u8>,
}

impl Artifact {
    fn text(name: &str, contents: String) -> Self {
        Self { name: name.to_string(), contents: contents.into_bytes() }
    }

    fn json<T: serde::Serialize>(name: &str, value: &T) -> Result<Self> {
        let mut s = serde_json::to_string_pretty(value)
            .map_err(|e| Error::numerical(format!("cannot serialize {name}: {e}")))?;
        s.push('\n');
        Ok(Self::text(name, s))
    }
}

/// Primary CSV table of a run; sweeps concatenate these.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: String,
    pub rows: Vec<String>,
}

impl Table {
    pub fn render(&self) -> String {
        let mut s = String::with_capacity(self.rows.iter().map(|r| r.len() + 1).sum::<usize>() + 64);
        s.push_str(&self.header);
        s.push('\n');
        for r in &self.rows {
            s.push_str(r);
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub table: Table,
    pub artifacts: Vec<Artifact>,
}

fn table_output(name: &str, table: Table, mut extra: Vec<Artifact>) -> RunOutput {
    let mut artifacts = vec![Artifact::text(name, table.render())];
    artifacts.append(&mut extra);
    RunOutput { table, artifacts }
}

pub fn run_subcommand(sub: Subcommand, cfg: &RunConfig) -> Result<RunOutput> {
    match sub {
        Subcommand::Fel => run_fel(cfg),
        Subcommand::PhaseDiagram => run_phase(cfg),
        Subcommand::Dynamics => run_dynamics(cfg),
        Subcommand::Decoherence => run_decoherence(cfg),
        Subcommand::Measure => run_measure(cfg),
        Subcommand::Lattice => run_lattice(cfg),
    }
}

fn run_fel(cfg: &RunConfig) -> Result<RunOutput> {
    let p: FelParams = cfg.params()?;
    let (mut ss, mut ratio) = evaluate_preset(&p.preset)?;
    if let Some(rho) = p.rho {
        ss = steady_state(rho, p.preset.p_z)?;
        ratio = ss.t_gain / p.preset.dynamical_time();
    }
    let row = [ss.rho, ss.p_z, ss.a0, ss.t_gain, ratio].map(fmt_f64).join(",");
    let table = Table { header: "rho,P_z,A0,t_gain,ratio".into(), rows: vec![row] };
    Ok(table_output("fel.csv", table, vec![]))
}

fn quasi(spec: Option<QuasiParticleSpec>, consts: &PhysicalConstants) -> QuasiParticleSpec {
    spec.unwrap_or_else(|| QuasiParticleSpec::water(consts))
}

fn run_phase(cfg: &RunConfig) -> Result<RunOutput> {
    let p: PhaseParams = cfg.params()?;
    let c = &cfg.constants;
    let spec = quasi(p.quasi_particle, c);
    let rs = linear_grid(p.rho_min, p.rho_max, p.nx)?;
    let taus = linear_grid(p.t_min, p.t_max, p.ny)?;
    let rho_c = crate::phase::critical_density(&spec, c)?;
    let t_unit = spec.eps_gap / c.k_b;
    let rho_grid: Vec<f64> = rs.iter().map(|r| r * rho_c).collect();
    let t_grid: Vec<f64> = taus.iter().map(|t| t * t_unit).collect();
    let diagram = phase_diagram(&spec, &rho_grid, &t_grid, c)?;
    let mut rows = Vec::with_capacity(rs.len() * taus.len());
    for (i, r) in rs.iter().enumerate() {
        for (j, tau) in taus.iter().enumerate() {
            rows.push(format!("{},{},{}", fmt_f64(*r), fmt_f64(*tau), diagram.at(i, j).phase.as_str()));
        }
    }
    let table = Table { header: "rho_over_rhoc,kT_over_eps,phase".into(), rows };
    Ok(table_output("phase_diagram.csv", table, vec![]))
}

/// Mode set, positions and initial state of a dynamics run.
pub struct DynamicsScene {
    pub modes: crate::mean_field::ModeSet,
    pub state: MeanFieldState,
    pub dt: f64,
}

pub fn build_scene(p: &DynamicsParams, c: &PhysicalConstants) -> Result<DynamicsScene> {
    let lc = coherence_length(c)?;
    let volume = p.volume.unwrap_or(lc * lc * lc);
    let positions: Vec<Vec3> = match &p.positions {
        Some(x) => x.clone(),
        None => (0..5).map(|i| [0.0, 0.0, 0.025 * lc * i as f64]).collect(),
    };
    if positions.is_empty() {
        return Err(Error::invalid("dynamics needs at least one element"));
    }
    let dipoles: Vec<Vec3> = match &p.dipoles {
        Some(d) if d.len() == positions.len() => d.clone(),
        Some(d) if d.len() == 1 => vec![d[0]; positions.len()],
        Some(d) => {
            return Err(Error::invalid(format!("{} dipoles for {} elements", d.len(), positions.len())))
        }
        None => {
            let d = p.coupling * (c.eps0 * c.eps_w * volume).sqrt();
            vec![[d, 0.0, 0.0]; positions.len()]
        }
    };
    let mode_list = match &p.modes {
        Some(m) => m.clone(),
        None => resonant_pair(c.eps_w, [0.0, 0.0, 1.0], [1.0, 0.0, 0.0], c).to_vec(),
    };
    let modes = make_modes(c.eps_w, &dipoles, volume, &mode_list, c)?;
    let state = match &p.initial {
        InitialState::Vacuum => MeanFieldState::vacuum(&modes, positions),
        InitialState::Stationary { v_amp, theta0 } => {
            stationary_state(&VevAnsatz { v_amp: *v_amp, theta0: *theta0 }, &modes, &positions)?
        }
        InitialState::StationaryFraction { fraction, theta0 } => {
            if !(0.0..=1.0).contains(fraction) {
                return Err(Error::domain(format!("fraction must lie in [0, 1], got {fraction}")));
            }
            let v = fraction * saturating_amplitude(&modes, &positions)?;
            stationary_state(&VevAnsatz { v_amp: v, theta0: *theta0 }, &modes, &positions)?
        }
        InitialState::Explicit { q, p: pp, spins } => {
            let cx = |v: &Vec<[f64; 2]>| v.iter().map(|z| Complex64::new(z[0], z[1])).collect();
            let st = MeanFieldState { q: cx(q), p: cx(pp), spins: spins.clone(), positions, time: 0.0 };
            st.check_consistent(&modes)?;
            if st.reality_defect(&modes) > 1e-10 {
                return Err(Error::invalid("explicit state violates q_{-k} = conj(q_k)"));
            }
            st
        }
    };
    Ok(DynamicsScene { dt: p.dt_omega / modes.omega, modes, state })
}

fn run_dynamics(cfg: &RunConfig) -> Result<RunOutput> {
    let p: DynamicsParams = cfg.params()?;
    if p.stride == 0 {
        return Err(Error::invalid("stride must be at least 1"));
    }
    let c = &cfg.constants;
    let scene = build_scene(&p, c)?;
    let modes = &scene.modes;
    let n_modes = modes.n_modes();
    let n_el = scene.state.spins.len();
    let mut header = vec!["t".to_string()];
    for m in 0..n_modes {
        header.push(format!("Re(q_{m})"));
        header.push(format!("Im(q_{m})"));
    }
    for i in 0..n_el {
        header.extend([format!("s1_{i}"), format!("s2_{i}"), format!("s3_{i}")]);
    }
    header.extend(["energy".to_string(), "spin_norm_drift".to_string()]);

    let norms0 = scene.state.spin_norms();
    let mut rows = Vec::with_capacity(p.steps / p.stride + 2);
    let mut step = 0usize;
    let mut failure = None;
    integrate_with(&scene.state, modes, scene.dt, p.steps, |s| {
        if failure.is_none() && (step.is_multiple_of(p.stride) || step == p.steps) {
            match hamiltonian(s, modes, c) {
                Ok(e) => {
                    let drift = s.spins.iter().zip(&norms0).map(|(x, n0)| (norm(x) - n0).abs()).fold(0.0, f64::max);
                    let mut cols = vec![fmt_f64(s.time)];
                    for q in &s.q {
                        cols.push(fmt_f64(q.re));
                        cols.push(fmt_f64(q.im));
                    }
                    for sp in &s.spins {
                        cols.extend(sp.iter().map(|x| fmt_f64(*x)));
                    }
                    cols.push(fmt_f64(e));
                    cols.push(fmt_f64(drift));
                    rows.push(cols.join(","));
                }
                Err(e) => failure = Some(e),
            }
        }
        step += 1;
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let table = Table { header: header.join(","), rows };
    Ok(table_output("trajectory.csv", table, vec![]))
}

fn complex_amplitudes(raw: &[[f64; 2]]) -> Vec<Complex64> {
    raw.iter().map(|z| Complex64::new(z[0], z[1])).collect()
}

fn density_csv(rho: &DensityMatrix) -> String {
    let mut s = String::from("row,col,label_row,label_col,re,im\n");
    for i in 0..rho.dim() {
        for j in 0..rho.dim() {
            let z = rho.entries[(i, j)];
            s.push_str(&format!(
                "{i},{j},{},{},{},{}\n",
                rho.labels[i],
                rho.labels[j],
                fmt_f64(z.re),
                fmt_f64(z.im)
            ));
        }
    }
    s
}

#[derive(serde::Serialize)]
struct DecoherenceJson<'a> {
    window: crate::decoherence::WindowShape,
    threshold: f64,
    pairs: &'a [crate::decoherence::DampingReport],
    all_satisfied: bool,
    dephased_trace: f64,
    dephased_min_eigenvalue: f64,
}

fn run_decoherence(cfg: &RunConfig) -> Result<RunOutput> {
    let p: DecoherenceParams = cfg.params()?;
    let c = &cfg.constants;
    let n = p.stimulus.outcomes.len();
    let (reports, factors): (Vec<_>, FactorMatrix) = pair_factors(&p.stack, &p.stimulus, p.window, p.threshold, c)?;
    let amps = match &p.amplitudes {
        Some(a) => complex_amplitudes(a),
        None => vec![Complex64::new(1.0 / (n as f64).sqrt(), 0.0); n],
    };
    let labels = (0..n).map(|n| BasisLabel::Outcome { n }).collect();
    let rho = DensityMatrix::pure(labels, &amps)?;
    let out = apply_superselection(&rho, &factors)?;
    let rows = reports
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{}",
                r.outcome_m,
                r.outcome_n,
                fmt_f64(r.log_progress),
                fmt_f64(r.total_factor()),
                r.satisfied
            )
        })
        .collect();
    let json = DecoherenceJson {
        window: p.window,
        threshold: p.threshold,
        pairs: &reports,
        all_satisfied: reports.iter().all(|r| r.satisfied),
        dephased_trace: out.trace(),
        dephased_min_eigenvalue: out.min_eigenvalue(),
    };
    let table = Table { header: "m,n,log_progress,factor,satisfied".into(), rows };
    let extra = vec![
        Artifact::json("decoherence_report.json", &json)?,
        Artifact::text("density_matrix.csv", density_csv(&out)),
    ];
    Ok(table_output("decoherence_pairs.csv", table, extra))
}

fn run_measure(cfg: &RunConfig) -> Result<RunOutput> {
    let p: MeasureParams = cfg.params()?;
    let c = &cfg.constants;
    let amps = complex_amplitudes(&p.amplitudes);
    let factors = p.damping.map(|f| FactorMatrix::uniform(amps.len(), f));
    let report = run_pipeline(
        &amps,
        p.scheme,
        &p.parsed_patterns()?,
        p.feedback.as_ref(),
        factors.as_ref(),
        p.samples,
        cfg.seed,
        p.temperature,
        c.k_b,
    )?;
    let rows = report
        .labels
        .iter()
        .enumerate()
        .map(|(i, l)| format!("{i},{l},{},{}", fmt_f64(report.final_diagonal[i]), report.histogram[i]))
        .collect();
    let table = Table { header: "index,label,weight,count".into(), rows };
    Ok(table_output("measure_histogram.csv", table, vec![Artifact::json("measure.json", &report)?]))
}

fn field_from_spec(
    f: &FieldSpec,
    spec: &LatticeSpec,
    spd: usize,
    c: &PhysicalConstants,
) -> Result<BoundaryField> {
    let mut field = match (&f.preset, &f.rho, &f.temperature) {
        (Some(preset), None, None) => preset_field(preset, spec, spd, f.t, c)?,
        (None, Some(rho), Some(t)) => BoundaryField { rho: rho.clone(), temperature: t.clone(), t: f.t, perturbed: None },
        _ => return Err(Error::invalid("a field needs either `preset` or both `rho` and `temperature`")),
    };
    field.t = f.t;
    field.perturbed = f.perturbed.clone();
    Ok(field)
}

#[derive(serde::Serialize)]
struct LatticeJson {
    dims: [usize; 3],
    l_c: f64,
    stats: crate::lattice::LatticeStats,
    history: Vec<crate::lattice::HistoryEntry>,
    rewrites: Vec<crate::lattice::RewriteReport>,
    latch: bool,
}

fn run_lattice(cfg: &RunConfig) -> Result<RunOutput> {
    let p: LatticeParams = cfg.params()?;
    let c = &cfg.constants;
    let qp = quasi(p.quasi_particle, c);
    let l_c = match p.l_c {
        Some(l) => l,
        None => coherence_length_for_gap(qp.eps_gap, c)?,
    };
    let spec = LatticeSpec { extents: p.extents, l_c, spec: qp };
    let first = field_from_spec(&p.field, &spec, p.samples_per_domain, c)?;
    let mut state = code_lattice(&spec, &first, c)?;
    let mut reports = Vec::with_capacity(p.rewrites.len());
    for f in &p.rewrites {
        let field = field_from_spec(f, &spec, p.samples_per_domain, c)?;
        let (next, rep) = rewrite(&state, &spec, &field, p.latch, c)?;
        state = next;
        reports.push(rep);
    }
    let mut bits = String::from("ix,iy,iz,bit\n");
    for (i, b) in state.cells() {
        bits.push_str(&format!("{},{},{},{}\n", i[0], i[1], i[2], u8::from(b)));
    }
    let st = stats(&state);
    let json = LatticeJson { dims: state.dims, l_c, stats: st, history: state.history.clone(), rewrites: reports, latch: p.latch };
    let row = format!("{},{},{},{}", st.n, st.ones, st.zeros, fmt_f64(st.ones_fraction));
    let table = Table { header: "n,ones,zeros,ones_fraction".into(), rows: vec![row] };
    let mut out = table_output("lattice_summary.csv", table, vec![]);
    out.artifacts.push(Artifact::text("lattice_bits.csv", bits));
    out.artifacts.push(Artifact::json("lattice_stats.json", &json)?);
    Ok(out)
}
