//! Trace and metric files: writing, reading, and the `analyze` / `report`
//! pipelines.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::ecology::{
    cluster_species, collect_organisms, habitat_species, log_normal_fit, lowest_class_is_modal, max_window_drop,
    mean, relative_abundance, species_area, succession_curve, FitResult, SpeciesArea, SuccessionRecord,
};
use crate::error::{EcologyError, Error};
use crate::model::{HabitatId, UserId};
use crate::rng::{streams, SplitMix64};
use crate::sim::{Ecosystem, NetworkSample};

pub const SUCCESSION_HEADER: &str = "request_index,user_id,habitat_id,generations,effectiveness";
pub const ABUNDANCE_HEADER: &str = "abundance_class,species_count";
pub const SPECIES_AREA_HEADER: &str = "n,mean_species,log10_n,log10_mean";
pub const FITS_HEADER: &str = "model,param1,param2,r_squared";
pub const NETWORK_HEADER: &str = "request_index,clustering_coefficient,char_path_length,edge_count";
pub const SMOOTHED_HEADER: &str = "request_index,effectiveness,smoothed";

/// Marker written for an undefined path length.
pub const UNDEFINED: &str = "NA";

pub fn succession_csv(records: &[SuccessionRecord]) -> String {
    let mut out = String::with_capacity(32 * (records.len() + 1));
    out.push_str(SUCCESSION_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6}",
            r.request_index, r.user_id, r.habitat_id, r.generations_run, r.effectiveness
        );
    }
    out
}

pub fn network_csv(series: &[NetworkSample]) -> String {
    let mut out = String::from(NETWORK_HEADER);
    out.push('\n');
    for s in series {
        let cpl = s.char_path_length.map_or_else(|| UNDEFINED.to_string(), |v| v.to_string());
        let _ = writeln!(out, "{},{},{},{}", s.request_index, s.clustering_coefficient, cpl, s.edge_count);
    }
    out
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, name: &str, raw: Option<&str>) -> Result<T, Error> {
    let raw = raw.ok_or_else(|| Error::parse(path, format!("line {line}: missing field `{name}`")))?;
    raw.trim()
        .parse()
        .map_err(|_| Error::parse(path, format!("line {line}: field `{name}` has invalid value `{raw}`")))
}

pub fn parse_succession_csv(path: &Path, text: &str) -> Result<Vec<SuccessionRecord>, Error> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == SUCCESSION_HEADER => {}
        _ => return Err(Error::parse(path, format!("line 1: expected header `{SUCCESSION_HEADER}`"))),
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        let record = SuccessionRecord {
            request_index: field(path, n, "request_index", cols.next())?,
            user_id: UserId(field(path, n, "user_id", cols.next())?),
            habitat_id: HabitatId(field(path, n, "habitat_id", cols.next())?),
            generations_run: field(path, n, "generations", cols.next())?,
            effectiveness: field(path, n, "effectiveness", cols.next())?,
        };
        if cols.next().is_some() {
            return Err(Error::parse(path, format!("line {n}: too many fields")));
        }
        if !(record.effectiveness > 0.0 && record.effectiveness <= 1.0) {
            return Err(Error::parse(path, format!("line {n}: field `effectiveness` outside (0, 1]")));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn read_trace(path: &Path) -> Result<Vec<SuccessionRecord>, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_succession_csv(path, &text)
}

/// All metrics derived from one snapshot and its trace.
#[derive(Clone, Debug, PartialEq)]
pub struct Analysis {
    pub records: Vec<SuccessionRecord>,
    pub smoothed: Vec<f64>,
    pub abundance: BTreeMap<u32, usize>,
    pub species_count: usize,
    pub organism_count: usize,
    pub log_normal: Option<FitResult>,
    pub species_area: SpeciesArea,
    pub network: Vec<NetworkSample>,
}

impl Analysis {
    pub fn effectiveness(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.effectiveness).collect()
    }
}

/// Pure function of the snapshot and trace: repeated calls give identical
/// results.
pub fn analyze(eco: &Ecosystem, records: Vec<SuccessionRecord>) -> Result<Analysis, Error> {
    let params = &eco.config.analysis;
    let effectiveness: Vec<f64> = records.iter().map(|r| r.effectiveness).collect();
    let smoothed = succession_curve(&effectiveness, params.succession_window);

    let organisms = collect_organisms(&eco.network);
    let partition = cluster_species(&organisms, params.species_theta)?;
    let abundance = relative_abundance(&partition);
    let sizes: Vec<f64> = partition.sizes().into_iter().map(|s| s as f64).collect();
    let log_normal = match log_normal_fit(&sizes) {
        Ok(f) => Some(f),
        Err(EcologyError::TooFew { .. }) => None,
        Err(e) => return Err(e.into()),
    };

    let per_habitat = habitat_species(&eco.network, &partition);
    let max_n = params.species_area_max_n.min(per_habitat.len());
    let mut rng = SplitMix64::for_stream(eco.config.master_seed, streams::SPECIES_AREA);
    let species_area = species_area(&per_habitat, params.species_area_replicates, 1..=max_n, &mut rng)?;

    Ok(Analysis {
        records,
        smoothed,
        abundance,
        species_count: partition.clusters.len(),
        organism_count: partition.total_organisms(),
        log_normal,
        species_area,
        network: eco.network_series.clone(),
    })
}

pub fn abundance_csv(hist: &BTreeMap<u32, usize>) -> String {
    let mut out = String::from(ABUNDANCE_HEADER);
    out.push('\n');
    for (class, count) in hist {
        let _ = writeln!(out, "{class},{count}");
    }
    out
}

pub fn species_area_csv(sa: &SpeciesArea) -> String {
    let mut out = String::from(SPECIES_AREA_HEADER);
    out.push('\n');
    for p in &sa.curve {
        let log_mean = if p.mean_species > 0.0 { p.mean_species.log10().to_string() } else { UNDEFINED.to_string() };
        let _ = writeln!(out, "{},{},{},{}", p.n, p.mean_species, (p.n as f64).log10(), log_mean);
    }
    out
}

pub fn fits_csv(fits: &[FitResult]) -> String {
    let mut out = String::from(FITS_HEADER);
    out.push('\n');
    for f in fits {
        let _ = writeln!(out, "{},{},{},{}", f.model.name(), f.param1, f.param2, f.r_squared);
    }
    out
}

pub fn smoothed_csv(records: &[SuccessionRecord], smoothed: &[f64]) -> String {
    let mut out = String::from(SMOOTHED_HEADER);
    out.push('\n');
    for (r, s) in records.iter().zip(smoothed) {
        let _ = writeln!(out, "{},{:.6},{:.6}", r.request_index, r.effectiveness, s);
    }
    out
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Error> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes succession.csv, succession_smoothed.csv, abundance.csv,
/// species_area.csv, fits.csv and network.csv into `out_dir`.
pub fn write_analysis(a: &Analysis, out_dir: &Path) -> Result<Vec<PathBuf>, Error> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let fits: Vec<FitResult> = a.log_normal.iter().chain(a.species_area.fit.iter()).copied().collect();
    Ok(vec![
        write(out_dir, "succession.csv", &succession_csv(&a.records))?,
        write(out_dir, "succession_smoothed.csv", &smoothed_csv(&a.records, &a.smoothed))?,
        write(out_dir, "abundance.csv", &abundance_csv(&a.abundance))?,
        write(out_dir, "species_area.csv", &species_area_csv(&a.species_area))?,
        write(out_dir, "fits.csv", &fits_csv(&fits))?,
        write(out_dir, "network.csv", &network_csv(&a.network))?,
    ])
}

pub fn analyze_files(snapshot: &Path, trace: &Path, out_dir: &Path) -> Result<Vec<PathBuf>, Error> {
    let eco = Ecosystem::load_snapshot(snapshot)?;
    let records = read_trace(trace)?;
    let a = analyze(&eco, records)?;
    write_analysis(&a, out_dir)
}

/// Files produced by [`run`].
#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub trace: PathBuf,
    pub snapshot: PathBuf,
    pub network: PathBuf,
    pub records: Vec<SuccessionRecord>,
}

/// Runs `eco` to its configured request total and writes succession.csv
/// (the trace), snapshot.json and network.csv into `out_dir`. A resumed
/// ecosystem only writes the records it produced itself.
pub fn run(mut eco: Ecosystem, out_dir: &Path) -> Result<RunArtifacts, Error> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let records = eco.run_to_end(|_, _| {})?;
    let trace = write(out_dir, "succession.csv", &succession_csv(&records))?;
    let snapshot = out_dir.join("snapshot.json");
    eco.save_snapshot(&snapshot)?;
    let network = write(out_dir, "network.csv", &network_csv(&eco.network_series))?;
    Ok(RunArtifacts { trace, snapshot, network, records })
}

/// Headline numbers checked against the expected ecosystem behaviour.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub requests: usize,
    pub first_window_mean: f64,
    pub final_window_mean: f64,
    pub max_window_drop: f64,
    pub lowest_class_modal: bool,
    pub species_area_slope: Option<f64>,
    pub species_area_r2: Option<f64>,
    pub initial_clustering: Option<f64>,
    pub final_clustering: Option<f64>,
}

/// Mean of the smoothed curve over the first and last `span` requests.
pub fn window_means(smoothed: &[f64], span: usize) -> (f64, f64) {
    let span = span.min(smoothed.len());
    (mean(&smoothed[..span]), mean(&smoothed[smoothed.len() - span..]))
}

pub fn summarize(a: &Analysis, smoothing_window: usize) -> Summary {
    let (first, last) = window_means(&a.smoothed, 100);
    Summary {
        requests: a.records.len(),
        first_window_mean: first,
        final_window_mean: last,
        max_window_drop: max_window_drop(&a.effectiveness(), smoothing_window),
        lowest_class_modal: lowest_class_is_modal(&a.abundance),
        species_area_slope: a.species_area.fit.map(|f| f.param1),
        species_area_r2: a.species_area.fit.map(|f| f.r_squared),
        initial_clustering: a.network.first().map(|s| s.clustering_coefficient),
        final_clustering: a.network.last().map(|s| s.clustering_coefficient),
    }
}

fn read_rows(path: &Path, header: &str) -> Result<Vec<Vec<String>>, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(header) {
        return Err(Error::parse(path, format!("line 1: expected header `{header}`")));
    }
    Ok(lines.filter(|l| !l.trim().is_empty()).map(|l| l.split(',').map(str::to_string).collect()).collect())
}

/// Plain-text summary of the metric CSVs written by `analyze`.
pub fn report(dir: &Path) -> Result<String, Error> {
    let records = read_trace(&dir.join("succession.csv"))?;
    let effectiveness: Vec<f64> = records.iter().map(|r| r.effectiveness).collect();
    let smoothed = succession_curve(&effectiveness, 50);
    let (first, last) = window_means(&smoothed, 100);
    let drop = max_window_drop(&effectiveness, 50);

    let abundance_path = dir.join("abundance.csv");
    let mut hist = BTreeMap::new();
    for (i, row) in read_rows(&abundance_path, ABUNDANCE_HEADER)?.iter().enumerate() {
        let class: u32 = field(&abundance_path, i + 2, "abundance_class", row.first().map(String::as_str))?;
        let count: usize = field(&abundance_path, i + 2, "species_count", row.get(1).map(String::as_str))?;
        hist.insert(class, count);
    }

    let fits_path = dir.join("fits.csv");
    let fits = read_rows(&fits_path, FITS_HEADER)?;
    let network_path = dir.join("network.csv");
    let network = read_rows(&network_path, NETWORK_HEADER)?;

    let mut out = String::new();
    let _ = writeln!(out, "requests                     {}", records.len());
    let _ = writeln!(out, "succession first-100 mean    {first:.4}");
    let _ = writeln!(out, "succession final-100 mean    {last:.4}");
    let _ = writeln!(out, "succession improvement       {:.4}", last - first);
    let _ = writeln!(out, "largest 50-request drop      {drop:.4}");
    let _ = writeln!(out, "species                      {}", hist.values().sum::<usize>());
    let _ = writeln!(out, "lowest abundance class modal {}", lowest_class_is_modal(&hist));
    for row in &fits {
        if row.len() == 4 {
            let _ = writeln!(out, "fit {:<24} p1={} p2={} r2={}", row[0], row[1], row[2], row[3]);
        }
    }
    if let (Some(a), Some(b)) = (network.first(), network.last()) {
        if a.len() == 4 && b.len() == 4 {
            let _ = writeln!(out, "clustering (request {:>5})   {}", a[0], a[1]);
            let _ = writeln!(out, "clustering (request {:>5})   {}", b[0], b[1]);
        }
    }
    Ok(out)
}
