//! Photoelectron spectrograms w(p; τ) and their TSV representation.
//!
//! File layout:
//!
//! ```text
//! # format = thzstreak-spectrogram-1
//! # thz = on | off
//! # xuv_peak_field = <f64>        (and the remaining field parameters)
//! # time_origin = <f64>           delays in the file are τ − time_origin
//! # delay_start = ... / delay_step = ... / delay_count = ...
//! # momentum_start = ... / momentum_step = ... / momentum_count = ...
//! # <free-form provenance keys>
//! delay<TAB>momentum<TAB>w
//! <one row per (delay, momentum), delay-major, floats in shortest round-trip form>
//! ```
//!
//! Reading restores every value bit for bit.

use crate::dynamics::density::parse_f64;
use crate::error::{invalid, Error, Result};
use crate::fields::{FieldConfig, ThzPulse, XuvPulse};
use crate::grid::{DelayGrid, MomentumGrid, UniformGrid};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

const FORMAT: &str = "thzstreak-spectrogram-1";

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrogramMetadata {
    /// Probe used; its center is irrelevant (the XUV center is the delay).
    pub fields: FieldConfig,
    pub ensemble_size: usize,
    pub master_seed: u64,
    pub system_hash: String,
    /// Delays are reported relative to this time.
    pub time_origin: f64,
    /// Additional provenance written verbatim to the header.
    pub extra: Vec<(String, String)>,
}

impl SpectrogramMetadata {
    pub fn thz_on(&self) -> bool {
        self.fields.thz.is_some()
    }
}

/// w(p; τ) on a rectangular grid, stored delay-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub momenta: MomentumGrid,
    pub delays: DelayGrid,
    pub values: Vec<f64>,
    pub metadata: SpectrogramMetadata,
}

impl Spectrogram {
    pub fn new(momenta: MomentumGrid, delays: DelayGrid, values: Vec<f64>, metadata: SpectrogramMetadata) -> Result<Self> {
        if values.len() != momenta.count * delays.count {
            return Err(invalid("spectrogram values do not match grid dimensions"));
        }
        if values.iter().any(|w| !(*w >= 0.0)) {
            return Err(invalid("spectrogram values must be non-negative"));
        }
        Ok(Spectrogram { momenta, delays, values, metadata })
    }

    pub fn at(&self, delay_index: usize, momentum_index: usize) -> f64 {
        self.values[delay_index * self.momenta.count + momentum_index]
    }

    /// w(p; τ_k) for all p.
    pub fn row(&self, delay_index: usize) -> &[f64] {
        let n = self.momenta.count;
        &self.values[delay_index * n..(delay_index + 1) * n]
    }

    /// w(p_k; τ) for all τ.
    pub fn column(&self, momentum_index: usize) -> Vec<f64> {
        (0..self.delays.count).map(|d| self.at(d, momentum_index)).collect()
    }

    /// w(p; τ) along τ at the momentum sample nearest to `p`, with the p used.
    pub fn column_near(&self, p: f64) -> Result<(f64, Vec<f64>)> {
        if !self.momenta.contains(p) {
            return Err(Error::Coverage(format!("momentum {p} outside the spectrogram grid")));
        }
        let k = self.momenta.nearest_index(p);
        Ok((self.momenta.value(k), self.column(k)))
    }

    pub fn write_tsv<W: Write>(&self, out: &mut W) -> Result<()> {
        let m = &self.metadata;
        let x = &m.fields.xuv;
        let mut text = String::new();
        let mut kv = |k: &str, v: String| writeln!(text, "# {k} = {v}").unwrap();
        kv("format", FORMAT.into());
        kv("thz", if m.thz_on() { "on" } else { "off" }.into());
        kv("xuv_peak_field", format!("{:e}", x.peak_field));
        kv("xuv_omega", format!("{:e}", x.omega));
        kv("xuv_sigma", format!("{:e}", x.sigma));
        if let Some(t) = &m.fields.thz {
            kv("thz_peak_field", format!("{:e}", t.peak_field));
            kv("thz_omega", format!("{:e}", t.omega));
            kv("thz_envelope_cycles", format!("{:e}", t.envelope_cycles));
        }
        kv("ensemble_size", m.ensemble_size.to_string());
        kv("master_seed", m.master_seed.to_string());
        kv("system_hash", m.system_hash.clone());
        kv("time_origin", format!("{:e}", m.time_origin));
        kv("delay_start", format!("{:e}", self.delays.start - m.time_origin));
        kv("delay_step", format!("{:e}", self.delays.step));
        kv("delay_count", self.delays.count.to_string());
        kv("momentum_start", format!("{:e}", self.momenta.start));
        kv("momentum_step", format!("{:e}", self.momenta.step));
        kv("momentum_count", self.momenta.count.to_string());
        for (k, v) in &m.extra {
            kv(k, v.clone());
        }
        text.push_str("delay\tmomentum\tw\n");
        for d in 0..self.delays.count {
            let tau = self.delays.value(d) - m.time_origin;
            for (k, w) in self.row(d).iter().enumerate() {
                writeln!(text, "{:e}\t{:e}\t{:e}", tau, self.momenta.value(k), w).unwrap();
            }
        }
        out.write_all(text.as_bytes())?;
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(input: R) -> Result<Self> {
        let mut header = BTreeMap::new();
        let mut extra = Vec::new();
        let mut values = Vec::new();
        let mut seen_columns = false;
        const KNOWN: &[&str] = &[
            "format", "thz", "xuv_peak_field", "xuv_omega", "xuv_sigma", "thz_peak_field", "thz_omega",
            "thz_envelope_cycles", "ensemble_size", "master_seed", "system_hash", "time_origin", "delay_start",
            "delay_step", "delay_count", "momentum_start", "momentum_step", "momentum_count",
        ];
        for line in input.lines() {
            let line = line?;
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once('=') {
                    let (k, v) = (k.trim().to_string(), v.trim().to_string());
                    if KNOWN.contains(&k.as_str()) {
                        header.insert(k, v);
                    } else {
                        extra.push((k, v));
                    }
                }
                continue;
            }
            if !seen_columns {
                seen_columns = true;
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let w = line
                .rsplit('\t')
                .next()
                .ok_or_else(|| Error::Format("empty spectrogram row".into()))?;
            values.push(parse_f64(w)?);
        }
        let get = |k: &str| header.get(k).ok_or_else(|| Error::Format(format!("missing header key '{k}'")));
        let num = |k: &str| get(k).and_then(|v| parse_f64(v));
        let count = |k: &str| {
            get(k).and_then(|v| v.parse::<usize>().map_err(|_| Error::Format(format!("bad count for '{k}'"))))
        };
        if get("format")? != FORMAT {
            return Err(Error::Format("unknown spectrogram format".into()));
        }
        let xuv = XuvPulse { peak_field: num("xuv_peak_field")?, omega: num("xuv_omega")?, sigma: num("xuv_sigma")?, center: 0.0 };
        let thz = match get("thz")?.as_str() {
            "on" => Some(ThzPulse {
                peak_field: num("thz_peak_field")?,
                omega: num("thz_omega")?,
                envelope_cycles: num("thz_envelope_cycles")?,
                center: 0.0,
            }),
            "off" => None,
            other => return Err(Error::Format(format!("thz must be on or off, got '{other}'"))),
        };
        let time_origin = num("time_origin")?;
        let delays = UniformGrid { start: num("delay_start")? + time_origin, step: num("delay_step")?, count: count("delay_count")? };
        let momenta = UniformGrid { start: num("momentum_start")?, step: num("momentum_step")?, count: count("momentum_count")? };
        let metadata = SpectrogramMetadata {
            fields: FieldConfig { xuv, thz },
            ensemble_size: count("ensemble_size")?,
            master_seed: get("master_seed")?.parse().map_err(|_| Error::Format("bad master_seed".into()))?,
            system_hash: get("system_hash")?.clone(),
            time_origin,
            extra,
        };
        Spectrogram::new(momenta, delays, values, metadata).map_err(|e| Error::Format(e.to_string()))
    }
}
