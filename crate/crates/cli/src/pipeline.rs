//! Stage execution. Every stage renders its files into memory; nothing touches
//! the output directory until all requested stages have succeeded.

use crate::error::CliError;
use crate::scenario::{Resolved, Scenario};
use clap::ValueEnum;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;
use thzstreak::dynamics::store::write_ensemble;
use thzstreak::dynamics::{ensemble_density_matrix, lindblad_propagate, DensityMatrixSeries, TrajectoryEnsemble};
use thzstreak::fields::FieldConfig;
use thzstreak::grid::{TimeGrid, UniformGrid};
use thzstreak::model::{model_spectrogram_values, peak_table, PeakModelParams};
use thzstreak::reconstruction::{extract_phase, reconstruct, ReconstructionAudit};
use thzstreak::sfa::{check_quadrature_step, spectrogram, QuadratureSettings};
use thzstreak::spectrogram::{Spectrogram, SpectrogramMetadata};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Stage {
    Simulate,
    Spectrogram,
    Model,
    Reconstruct,
    Phase,
    Slice,
}

impl Stage {
    pub const ALL: [Stage; 6] = [Stage::Simulate, Stage::Spectrogram, Stage::Model, Stage::Reconstruct, Stage::Phase, Stage::Slice];
}

/// One rendered output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// A validated scenario together with lazily computed intermediate results.
pub struct Pipeline {
    pub resolved: Resolved,
    pub config_hash: String,
    pub seed: u64,
    pub grid: TimeGrid,
    pub max_ip: f64,
    ensemble: Option<TrajectoryEnsemble>,
    truth: Option<DensityMatrixSeries>,
    spec_on: Option<Spectrogram>,
    spec_off: Option<Spectrogram>,
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

impl Pipeline {
    /// Resolve units and check every grid before any computation.
    pub fn new(scenario: &Scenario) -> Result<Self, CliError> {
        let resolved = scenario.resolve()?;
        let r = &resolved;
        let quad = QuadratureSettings::default();
        let margin = quad.window_sigmas * r.fields.xuv.sigma + 10.0 * r.time_step;
        let t0 = r.system.reference_time();
        let grid = UniformGrid::covering(r.delays.start - margin, r.delays.last() + margin, r.time_step, t0)?;
        if r.delays.values().iter().any(|&tau| grid.index_of(tau).is_none()) {
            return Err(CliError::Config("delays must be whole multiples of grids.time_step away from reference_time".into()));
        }
        let max_ip = r.system.ionization_potentials().into_iter().fold(0.0, f64::max);
        check_quadrature_step(&r.fields, r.momenta.last(), max_ip, r.time_step)?;
        Ok(Pipeline {
            config_hash: scenario.hash(),
            seed: scenario.ensemble.seed,
            grid,
            max_ip,
            resolved,
            ensemble: None,
            truth: None,
            spec_on: None,
            spec_off: None,
        })
    }

    pub fn t0(&self) -> f64 {
        self.resolved.system.reference_time()
    }

    fn provenance(&self) -> Vec<(String, String)> {
        vec![("config_hash".into(), self.config_hash.clone()), ("seed".into(), self.seed.to_string())]
    }

    fn header(&self, format: &str) -> String {
        let mut h = format!("# format = {format}\n");
        for (k, v) in self.provenance() {
            writeln!(h, "# {k} = {v}").unwrap();
        }
        writeln!(h, "# time_origin = {}", num(self.t0())).unwrap();
        h
    }

    fn ensemble(&mut self) -> Result<&TrajectoryEnsemble, CliError> {
        if self.ensemble.is_none() {
            let r = &self.resolved;
            self.ensemble = Some(TrajectoryEnsemble::generate(&r.system, &self.grid, r.trajectories, self.seed, 1)?);
        }
        Ok(self.ensemble.as_ref().unwrap())
    }

    /// Ensemble density matrix at the delays.
    pub fn truth(&mut self) -> Result<&DensityMatrixSeries, CliError> {
        if self.truth.is_none() {
            let delays = self.resolved.delays.values();
            let grid = self.grid;
            let rho = ensemble_density_matrix(self.ensemble()?)?;
            self.truth = Some(rho.sample(&grid, &delays)?);
        }
        Ok(self.truth.as_ref().unwrap())
    }

    fn compute_spectrogram(&mut self, fields: FieldConfig) -> Result<Spectrogram, CliError> {
        let (momenta, delays, max_ip, t0) = (self.resolved.momenta, self.resolved.delays, self.max_ip, self.t0());
        let extra = self.provenance();
        let ens = self.ensemble()?;
        let mut spec = spectrogram(ens, &fields, &momenta, &delays, max_ip, QuadratureSettings::default())?;
        spec.metadata.time_origin = t0;
        spec.metadata.extra = extra;
        Ok(spec)
    }

    pub fn spectrogram_off(&mut self) -> Result<&Spectrogram, CliError> {
        if self.spec_off.is_none() {
            let fields = self.resolved.fields.without_thz();
            self.spec_off = Some(self.compute_spectrogram(fields)?);
        }
        Ok(self.spec_off.as_ref().unwrap())
    }

    pub fn spectrogram_on(&mut self) -> Result<Option<&Spectrogram>, CliError> {
        if !self.resolved.fields.thz_on() {
            return Ok(None);
        }
        if self.spec_on.is_none() {
            let fields = self.resolved.fields;
            self.spec_on = Some(self.compute_spectrogram(fields)?);
        }
        Ok(self.spec_on.as_ref())
    }

    fn require_on(&mut self, what: &str) -> Result<Spectrogram, CliError> {
        match self.spectrogram_on()? {
            Some(s) => Ok(s.clone()),
            None => Err(CliError::Config(format!("{what} requires a [thz] table"))),
        }
    }

    fn density_file(&self, series: &DensityMatrixSeries) -> Result<Vec<u8>, CliError> {
        let mut header = self.provenance();
        header.push(("level_labels".into(), self.resolved.labels.join(",")));
        let mut buf = Vec::new();
        series.write_tsv(&mut buf, &header, self.t0())?;
        Ok(buf)
    }

    fn spectrogram_file(spec: &Spectrogram) -> Result<Vec<u8>, CliError> {
        let mut buf = Vec::new();
        spec.write_tsv(&mut buf)?;
        Ok(buf)
    }

    fn simulate(&mut self) -> Result<Vec<Output>, CliError> {
        let provenance = self.provenance();
        let mut ens_bytes = Vec::new();
        write_ensemble(self.ensemble()?, &provenance, &mut ens_bytes)?;
        let truth = self.truth()?.clone();
        let lindblad = lindblad_propagate(&self.resolved.system, &self.grid, 1)?.sample(&self.grid, &self.resolved.delays.values())?;
        Ok(vec![
            Output { name: "ensemble.bin".into(), bytes: ens_bytes },
            Output { name: "density_truth.tsv".into(), bytes: self.density_file(&truth)? },
            Output { name: "density_lindblad.tsv".into(), bytes: self.density_file(&lindblad)? },
        ])
    }

    fn spectrograms(&mut self) -> Result<Vec<Output>, CliError> {
        let mut out = vec![Output { name: "spectrogram_thz_off.tsv".into(), bytes: Self::spectrogram_file(self.spectrogram_off()?)? }];
        if let Some(on) = self.spectrogram_on()? {
            out.push(Output { name: "spectrogram_thz_on.tsv".into(), bytes: Self::spectrogram_file(on)? });
        }
        Ok(out)
    }

    fn model(&mut self) -> Result<Vec<Output>, CliError> {
        let r = self.resolved.clone();
        let ips = r.system.ionization_potentials();
        let truth = self.truth()?.clone();
        let mut out = Vec::new();
        let mut table = self.header("thzstreak-peaks-1");
        let on = PeakModelParams::from_fields(&r.fields, ips.clone())?;
        writeln!(table, "# streaking_slope = {}", num(on.alpha)).unwrap();
        writeln!(table, "# sigma = {}", num(on.sigma)).unwrap();
        table.push_str("i\tj\tlabel_i\tlabel_j\tmomentum\twidth\tsuppression\tfringe_wavenumber\tamplitude\n");
        for row in peak_table(&on) {
            writeln!(
                table,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                row.i,
                row.j,
                r.labels[row.i],
                r.labels[row.j],
                num(row.momentum),
                num(row.width),
                num(row.suppression),
                num(row.fringe_wavenumber),
                num(row.amplitude)
            )
            .unwrap();
        }
        out.push(Output { name: "peak_table.tsv".into(), bytes: table.into_bytes() });

        let mut variants = vec![("off", r.fields.without_thz())];
        if r.fields.thz_on() {
            variants.push(("on", r.fields));
        }
        for (tag, fields) in variants {
            let params = PeakModelParams::from_fields(&fields, ips.clone())?;
            let values = model_spectrogram_values(&truth, &params, &r.momenta, &r.delays)?;
            let mut extra = self.provenance();
            extra.push(("source".into(), "peak-model".into()));
            let metadata = SpectrogramMetadata {
                fields: fields.centered_at(0.0),
                ensemble_size: r.trajectories,
                master_seed: self.seed,
                system_hash: r.system.hash(),
                time_origin: self.t0(),
                extra,
            };
            let spec = Spectrogram::new(r.momenta, r.delays, values, metadata)?;
            out.push(Output { name: format!("model_spectrogram_thz_{tag}.tsv"), bytes: Self::spectrogram_file(&spec)? });
        }
        Ok(out)
    }

    fn reconstruct(&mut self) -> Result<Vec<Output>, CliError> {
        let on = self.require_on("reconstruction")?;
        let off = self.spectrogram_off()?.clone();
        let ips = self.resolved.system.ionization_potentials();
        let result = reconstruct(&off, &on, &ips, &self.resolved.reconstruction)?;
        #[derive(Serialize)]
        struct AuditFile<'a> {
            format: &'static str,
            config_hash: &'a str,
            seed: u64,
            levels: &'a [String],
            audit: &'a ReconstructionAudit,
        }
        let file = AuditFile {
            format: "thzstreak-audit-1",
            config_hash: &self.config_hash,
            seed: self.seed,
            levels: &self.resolved.labels,
            audit: &result.audit,
        };
        let mut json = serde_json::to_vec_pretty(&file).map_err(|e| CliError::Config(e.to_string()))?;
        json.push(b'\n');
        Ok(vec![
            Output { name: "density_reconstructed.tsv".into(), bytes: self.density_file(&result.series)? },
            Output { name: "reconstruction_audit.json".into(), bytes: json },
        ])
    }

    fn phase(&mut self) -> Result<Vec<Output>, CliError> {
        let on = self.require_on("phase readout")?;
        let r = &self.resolved;
        let ips = r.system.ionization_potentials();
        let pairs = match &r.phase_pairs {
            Some(p) => p.clone(),
            None => {
                let params = PeakModelParams::from_fields(&r.fields, ips.clone())?;
                params.pairs().into_iter().filter(|&(i, j)| params.suppression(i, j) >= r.reconstruction.suppression_floor).collect()
            }
        };
        let mut text = self.header("thzstreak-phase-1");
        text.push_str("i\tj\tlabel_i\tlabel_j\tdelay\tphase\tcoherence_re\tcoherence_im\tfringe_wavenumber\trms_residual\n");
        for (i, j) in pairs {
            let f = extract_phase(&on, r.phase_delay, (i, j), &ips, &r.reconstruction)?;
            writeln!(
                text,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                f.i,
                f.j,
                r.labels[f.i],
                r.labels[f.j],
                num(f.delay - self.t0()),
                num(f.phase),
                num(f.coherence_re),
                num(f.coherence_im),
                num(f.fringe_wavenumber),
                num(f.rms_residual)
            )
            .unwrap();
        }
        Ok(vec![Output { name: "phase_readout.tsv".into(), bytes: text.into_bytes() }])
    }

    fn slice(&mut self) -> Result<Vec<Output>, CliError> {
        let r = self.resolved.clone();
        let t0 = self.t0();
        let off = self.spectrogram_off()?.clone();
        let on = self.spectrogram_on()?.cloned();
        let mut specs = vec![("off", off)];
        if let Some(on) = on {
            specs.push(("on", on));
        }
        let params = PeakModelParams::from_fields(&r.fields, r.system.ionization_potentials())?;
        let peaks: Vec<(usize, usize, f64)> = peak_table(&params)
            .iter()
            .filter(|row| r.momenta.contains(row.momentum))
            .map(|row| (row.i, row.j, row.momentum))
            .collect();

        let mut text = self.header("thzstreak-peak-slices-1");
        let mut names = String::from("delay");
        let mut columns = Vec::new();
        for &(i, j, p) in &peaks {
            let k = r.momenta.nearest_index(p);
            let (a, b) = (&r.labels[i], &r.labels[j]);
            writeln!(text, "# momentum_{a}_{b} = {}", num(r.momenta.value(k))).unwrap();
            for (tag, spec) in &specs {
                columns.push(spec.column(k));
                write!(names, "\tw_{tag}_{a}_{b}").unwrap();
            }
        }
        text.push_str(&names);
        text.push('\n');
        for d in 0..r.delays.count {
            text.push_str(&num(r.delays.value(d) - t0));
            for c in &columns {
                write!(text, "\t{}", num(c[d])).unwrap();
            }
            text.push('\n');
        }

        let mut cuts = self.header("thzstreak-momentum-slices-1");
        let rows: Vec<usize> = r.slice_delays.iter().map(|&tau| r.delays.index_of(tau).unwrap()).collect();
        cuts.push_str("momentum");
        for &d in &rows {
            for (tag, _) in &specs {
                write!(cuts, "\tw_{tag}@{}", num(r.delays.value(d) - t0)).unwrap();
            }
        }
        cuts.push('\n');
        for k in 0..r.momenta.count {
            cuts.push_str(&num(r.momenta.value(k)));
            for &d in &rows {
                for (_, spec) in &specs {
                    write!(cuts, "\t{}", num(spec.at(d, k))).unwrap();
                }
            }
            cuts.push('\n');
        }
        Ok(vec![
            Output { name: "slice_peaks.tsv".into(), bytes: text.into_bytes() },
            Output { name: "slice_momenta.tsv".into(), bytes: cuts.into_bytes() },
        ])
    }

    /// Render the outputs of `stages`, in stage order.
    pub fn run(&mut self, stages: &[Stage]) -> Result<Vec<Output>, CliError> {
        let mut stages = stages.to_vec();
        stages.sort();
        stages.dedup();
        let mut out = Vec::new();
        for stage in stages {
            out.extend(match stage {
                Stage::Simulate => self.simulate()?,
                Stage::Spectrogram => self.spectrograms()?,
                Stage::Model => self.model()?,
                Stage::Reconstruct => self.reconstruct()?,
                Stage::Phase => self.phase()?,
                Stage::Slice => self.slice()?,
            });
        }
        Ok(out)
    }

    /// Human-readable summary of the resolved scenario.
    pub fn summary(&self) -> String {
        let r = &self.resolved;
        let mut s = String::new();
        writeln!(s, "config_hash = {}", self.config_hash).unwrap();
        writeln!(s, "seed = {}", self.seed).unwrap();
        writeln!(s, "levels = {}", r.labels.join(", ")).unwrap();
        writeln!(s, "xuv sigma = {:.4} au, omega = {:.4} au", r.fields.xuv.sigma, r.fields.xuv.omega).unwrap();
        writeln!(s, "streaking slope = {:.6e} au", r.fields.streaking_slope()).unwrap();
        writeln!(s, "time grid = [{:.2}, {:.2}] au, step {} ({} points)", self.grid.start, self.grid.last(), self.grid.step, self.grid.count).unwrap();
        writeln!(s, "delays = {} points, momenta = {} points, trajectories = {}", r.delays.count, r.momenta.count, r.trajectories).unwrap();
        if let Ok(params) = PeakModelParams::from_fields(&r.fields, r.system.ionization_potentials()) {
            for row in peak_table(&params) {
                let covered = if r.momenta.contains(row.momentum) { "" } else { " (outside momentum grid)" };
                writeln!(
                    s,
                    "peak {}/{}: p = {:.4}, width = {:.4}, suppression = {:.3e}{covered}",
                    r.labels[row.i], r.labels[row.j], row.momentum, row.width, row.suppression
                )
                .unwrap();
            }
        }
        s
    }
}

/// Write all outputs, or none: files are staged under temporary names and
/// renamed only after every write succeeded.
pub fn write_outputs(dir: &Path, outputs: &[Output]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("cannot create {}", dir.display()), e))?;
    let staged: Vec<_> = outputs.iter().map(|o| dir.join(format!(".{}.partial", o.name))).collect();
    let cleanup = |upto: usize| {
        for p in &staged[..upto] {
            let _ = std::fs::remove_file(p);
        }
    };
    for (k, (o, path)) in outputs.iter().zip(&staged).enumerate() {
        if let Err(e) = std::fs::write(path, &o.bytes) {
            cleanup(k + 1);
            return Err(CliError::io(format!("cannot write {}", path.display()), e));
        }
    }
    for (o, path) in outputs.iter().zip(&staged) {
        std::fs::rename(path, dir.join(&o.name)).map_err(|e| CliError::io(format!("cannot rename {}", path.display()), e))?;
    }
    Ok(())
}
