//! The `rescale` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or model error, 3 failed
//! verification.

use crate::error::Error;
use crate::families::{self, FamilyKind, FamilySpec, ReportRow};
use crate::gaussmodel::{self, estimate_moments, GaussianModel, Moments, PointSet};
use crate::ingest;
use crate::linalg::{Matrix, SymMatrix};
use crate::oracle;
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: &str = "1";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "rescale",
    version,
    about = "Fit optimal Gaussian coordinate systems and rescale data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the optimal Gaussian of a family and write it as JSON.
    Fit {
        /// full, fixed-mean, isotropic, fixed-mean-isotropic, diagonal, fixed-mean-diagonal
        #[arg(long)]
        family: String,
        /// Fixed origin: comma-separated coordinates, or one number for a constant vector.
        #[arg(long, allow_hyphen_values = true)]
        mean: Option<String>,
        #[arg(long)]
        input: PathBuf,
        /// Defaults to standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Match score and cross-entropy of a dataset against a stored model.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
    },
    /// Apply y -> Σ^{-1/2}(y - m) for a stored model.
    Transform {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also write an SVG scatter of the first two transformed coordinates.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Match scores of all six families for the given fixed means.
    Report {
        #[arg(long)]
        input: PathBuf,
        /// `;`-separated means; each is `data` (the sample mean), a single
        /// number broadcast to every coordinate, or comma-separated coordinates.
        #[arg(long, default_value = "data", allow_hyphen_values = true)]
        means: String,
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        format: ReportFormat,
    },
    /// Cut a binary PPM image into flattened RGB blocks.
    ImageBlocks {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        block: usize,
    },
    /// Draw a seeded Gaussian sample.
    Synth {
        #[arg(long, allow_hyphen_values = true)]
        mean: String,
        /// Rows separated by `;`, entries by `,`.
        #[arg(long, allow_hyphen_values = true)]
        cov: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare every closed-form fit against the numerical oracle.
    Verify {
        /// `a..b` (inclusive) or a single dimension.
        #[arg(long, default_value = "1..4")]
        dims: String,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Text,
    Csv,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(Error),
    Verification(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Verification(_) => EXIT_VERIFY,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Data(err) => write!(f, "error: {err}"),
            CliError::Verification(msg) => write!(f, "verification failed: {msg}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        CliError::Data(err)
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Data(err.into())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Family as stored in a model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyDocument {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_mean: Option<Vec<f64>>,
}

/// A fitted model on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema_version: String,
    pub family: FamilyDocument,
    pub dim: usize,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    #[serde(rename = "match")]
    pub match_score: f64,
    pub cross_entropy: f64,
}

impl ModelDocument {
    pub fn from_fit(fit: &families::FitResult) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            family: FamilyDocument {
                kind: fit.family.kind().name().to_string(),
                fixed_mean: fit.family.fixed_mean().map(<[f64]>::to_vec),
            },
            dim: fit.model.dim(),
            mean: fit.model.mean().to_vec(),
            covariance: fit.model.cov().to_rows(),
            match_score: fit.match_score,
            cross_entropy: fit.cross_entropy,
        }
    }

    pub fn family_spec(&self) -> crate::Result<FamilySpec> {
        let kind: FamilyKind = self.family.kind.parse()?;
        FamilySpec::new(kind, self.family.fixed_mean.clone())
    }

    /// Validates the document and rebuilds its Gaussian.
    pub fn model(&self) -> crate::Result<GaussianModel> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported schema version '{}'",
                self.schema_version
            )));
        }
        self.family_spec()?;
        if self.mean.len() != self.dim || self.covariance.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "model dimension {} does not match its mean/covariance",
                self.dim
            )));
        }
        GaussianModel::new(self.mean.clone(), SymMatrix::from_rows(&self.covariance)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model document serializes")
    }

    pub fn from_json(text: &str) -> crate::Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ParseError {
            line: e.line(),
            message: e.to_string(),
        })
    }
}

/// Runs the tool on `args` (including the program name) and returns the
/// exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> CliResult<()> {
    match command {
        Command::Fit {
            family,
            mean,
            input,
            output,
        } => cmd_fit(&family, mean.as_deref(), &input, output.as_deref(), out),
        Command::Score { model, input } => cmd_score(&model, &input, out),
        Command::Transform {
            model,
            input,
            output,
            plot,
        } => cmd_transform(&model, &input, output.as_deref(), plot.as_deref(), out),
        Command::Report {
            input,
            means,
            format,
        } => cmd_report(&input, &means, format, out),
        Command::ImageBlocks {
            input,
            output,
            block,
        } => cmd_image_blocks(&input, output.as_deref(), block, out),
        Command::Synth {
            mean,
            cov,
            n,
            seed,
            output,
        } => cmd_synth(&mean, &cov, n, seed, output.as_deref(), out),
        Command::Verify { dims, trials, seed } => cmd_verify(&dims, trials, seed, out),
    }
}

fn read_points(path: &Path) -> CliResult<PointSet> {
    let file = File::open(path)
        .map_err(|e| Error::Io(format!("cannot open {}: {e}", path.display())))?;
    Ok(ingest::read_points_csv(BufReader::new(file))?)
}

fn read_model(path: &Path) -> CliResult<(ModelDocument, GaussianModel)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
    let doc = ModelDocument::from_json(&text)?;
    let model = doc.model()?;
    Ok((doc, model))
}

/// Writes to `path`, or to `out` when no path is given.
fn emit(path: Option<&Path>, out: &mut dyn Write, f: impl FnOnce(&mut dyn Write) -> CliResult<()>) -> CliResult<()> {
    match path {
        Some(p) => {
            let file = File::create(p)
                .map_err(|e| Error::Io(format!("cannot create {}: {e}", p.display())))?;
            let mut w = BufWriter::new(file);
            f(&mut w)?;
            w.flush()?;
            Ok(())
        }
        None => f(out),
    }
}

fn parse_number(text: &str) -> CliResult<f64> {
    text.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::Usage(format!("'{}' is not a finite number", text.trim())))
}

fn parse_vector(text: &str) -> CliResult<Vec<f64>> {
    text.split(',').map(parse_number).collect()
}

fn parse_matrix(text: &str) -> CliResult<Vec<Vec<f64>>> {
    text.split(';').map(parse_vector).collect()
}

/// A fixed mean in CLI syntax, resolved against the data dimension.
fn resolve_mean(token: &str, data_mean: &[f64]) -> CliResult<Vec<f64>> {
    let token = token.trim();
    if token == "data" {
        return Ok(data_mean.to_vec());
    }
    let v = parse_vector(token)?;
    match v.len() {
        1 => Ok(vec![v[0]; data_mean.len()]),
        n if n == data_mean.len() => Ok(v),
        n => Err(CliError::Usage(format!(
            "mean '{token}' has {n} coordinates, data has {}",
            data_mean.len()
        ))),
    }
}

fn cmd_fit(
    family: &str,
    mean: Option<&str>,
    input: &Path,
    output: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult<()> {
    let kind: FamilyKind = family.parse().map_err(|e: Error| CliError::Usage(e.to_string()))?;
    match (kind.has_fixed_mean(), mean) {
        (true, None) => return Err(CliError::Usage(format!("family '{kind}' requires --mean"))),
        (false, Some(_)) => {
            return Err(CliError::Usage(format!("family '{kind}' does not accept --mean")))
        }
        _ => {}
    }
    let y = read_points(input)?;
    let mom = estimate_moments(&y)?;
    let fixed = mean.map(|m| resolve_mean(m, &mom.mean)).transpose()?;
    let spec = FamilySpec::new(kind, fixed)?;
    let fit = families::fit(&mom, &spec)?;
    let doc = ModelDocument::from_fit(&fit);
    emit(output, out, |w| {
        writeln!(w, "{}", doc.to_json())?;
        Ok(())
    })
}

fn cmd_score(model: &Path, input: &Path, out: &mut dyn Write) -> CliResult<()> {
    let (_, g) = read_model(model)?;
    let mom = estimate_moments(&read_points(input)?)?;
    let m = gaussmodel::match_score(&mom, &g)?;
    let h = gaussmodel::cross_entropy(&mom, &g)?;
    writeln!(out, "match {m}")?;
    writeln!(out, "cross_entropy {h}")?;
    Ok(())
}

fn cmd_transform(
    model: &Path,
    input: &Path,
    output: Option<&Path>,
    plot: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult<()> {
    let (_, g) = read_model(model)?;
    let y = read_points(input)?;
    let t = families::whitening_transform(&g)?;
    let white = t.apply_all(&y)?;
    if let Some(p) = plot {
        std::fs::write(p, scatter_svg(white.as_matrix()))
            .map_err(|e| Error::Io(format!("cannot write {}: {e}", p.display())))?;
    }
    emit(output, out, |w| Ok(ingest::write_points_csv(white.as_matrix(), w)?))
}

fn cmd_report(input: &Path, means: &str, format: ReportFormat, out: &mut dyn Write) -> CliResult<()> {
    let mom = estimate_moments(&read_points(input)?)?;
    let labels: Vec<String> = means.split(';').map(|s| s.trim().to_string()).collect();
    let vectors = labels
        .iter()
        .map(|l| resolve_mean(l, &mom.mean))
        .collect::<CliResult<Vec<_>>>()?;
    let rows = families::family_report(&mom, &vectors)?;
    let text = match format {
        ReportFormat::Text => render_report_text(&mom, &rows, &labels),
        ReportFormat::Csv => render_report_csv(&rows, &labels),
    };
    out.write_all(text.as_bytes())?;
    Ok(())
}

fn cmd_image_blocks(input: &Path, output: Option<&Path>, block: usize, out: &mut dyn Write) -> CliResult<()> {
    let bytes = std::fs::read(input)
        .map_err(|e| Error::Io(format!("cannot read {}: {e}", input.display())))?;
    let raster = ingest::decode_ppm(&bytes)?;
    let blocks = ingest::image_to_blocks(&raster, block)?;
    emit(output, out, |w| Ok(ingest::write_points_csv(&blocks.blocks, w)?))
}

fn cmd_synth(
    mean: &str,
    cov: &str,
    n: usize,
    seed: u64,
    output: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult<()> {
    let mean = parse_vector(mean)?;
    let rows = parse_matrix(cov)?;
    if rows.len() != mean.len() || rows.iter().any(|r| r.len() != mean.len()) {
        return Err(CliError::Usage(format!(
            "--cov must be {0}x{0} to match --mean",
            mean.len()
        )));
    }
    let cov = SymMatrix::from_rows(&rows)?;
    let y = ingest::sample_gaussian(&mean, &cov, n, seed)?;
    emit(output, out, |w| Ok(ingest::write_points_csv(y.as_matrix(), w)?))
}

fn parse_dims(text: &str) -> CliResult<std::ops::RangeInclusive<usize>> {
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .ok()
            .filter(|&d| d >= 1)
            .ok_or_else(|| CliError::Usage(format!("bad dimension '{s}'")))
    };
    let range = match text.split_once("..") {
        Some((a, b)) => parse(a)?..=parse(b.trim_start_matches('='))?,
        None => {
            let d = parse(text)?;
            d..=d
        }
    };
    if range.is_empty() {
        return Err(CliError::Usage(format!("empty dimension range '{text}'")));
    }
    Ok(range)
}

fn cmd_verify(dims: &str, trials: usize, seed: u64, out: &mut dyn Write) -> CliResult<()> {
    let dims = parse_dims(dims)?;
    let cases = oracle::run_verification(dims, trials, seed)?;
    let mut failures = 0;
    for kind in FamilyKind::ALL {
        let of_kind: Vec<_> = cases.iter().filter(|c| c.family == kind).collect();
        let worst = of_kind
            .iter()
            .filter_map(|c| c.oracle.as_ref().ok().map(|o| (o - c.closed_form).abs()))
            .fold(0.0, f64::max);
        let failed = of_kind.iter().filter(|c| !c.passed()).count();
        failures += failed;
        let status = if failed == 0 { "PASS" } else { "FAIL" };
        writeln!(
            out,
            "{status} {:<22} cases {:>4}  failed {:>3}  max |oracle - closed| {:.3e}",
            kind.name(),
            of_kind.len(),
            failed,
            worst
        )?;
    }
    for c in cases.iter().filter(|c| !c.passed()) {
        writeln!(
            out,
            "  trial {} dim {} n {} {}: closed {} oracle {:?}",
            c.trial, c.dim, c.points, c.family, c.closed_form, c.oracle
        )?;
    }
    if failures > 0 {
        return Err(CliError::Verification(format!("{failures} of {} cases", cases.len())));
    }
    writeln!(out, "all {} cases passed", cases.len())?;
    Ok(())
}

fn mean_label(row: &ReportRow, labels: &[String]) -> String {
    row.mean_index
        .map_or_else(|| "-".to_string(), |i| labels[i].clone())
}

fn render_report_csv(rows: &[ReportRow], labels: &[String]) -> String {
    let mut s = String::from("family,mean,match,cross_entropy\n");
    for r in rows {
        let label = mean_label(r, labels);
        let quoted = if label.contains(',') {
            format!("\"{label}\"")
        } else {
            label
        };
        let _ = writeln!(s, "{},{},{},{}", r.family, quoted, r.match_score, r.cross_entropy);
    }
    s
}

/// Long listing of every row, then the fixed-mean grid (one line per mean;
/// full, diagonal and isotropic covariance as columns) and a family nesting
/// check.
fn render_report_text(mom: &Moments, rows: &[ReportRow], labels: &[String]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "dimension {}", mom.dim());
    let _ = writeln!(s, "{:<22} {:<12} {:>24} {:>24}", "family", "mean", "match", "cross_entropy");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<22} {:<12} {:>24} {:>24}",
            r.family.name(),
            truncate(&mean_label(r, labels), 12),
            r.match_score,
            r.cross_entropy
        );
    }

    let score = |kind: FamilyKind, idx: Option<usize>| {
        rows.iter()
            .find(|r| r.family == kind && r.mean_index == idx)
            .map(|r| r.match_score)
            .unwrap_or(f64::NAN)
    };
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:<12} {:>24} {:>24} {:>24}",
        "mean", "fixed-mean", "fixed-mean-diagonal", "fixed-mean-isotropic"
    );
    let mut violations = Vec::new();
    for (i, label) in labels.iter().enumerate() {
        let g = score(FamilyKind::FixedMean, Some(i));
        let d = score(FamilyKind::FixedMeanDiagonal, Some(i));
        let iso = score(FamilyKind::FixedMeanIsotropic, Some(i));
        let _ = writeln!(s, "{:<12} {:>24} {:>24} {:>24}", truncate(label, 12), g, d, iso);
        if !(g <= d + 1e-9 && d <= iso + 1e-9) {
            violations.push(label.clone());
        }
    }
    let full = score(FamilyKind::Full, None);
    let diag = score(FamilyKind::Diagonal, None);
    let iso = score(FamilyKind::Isotropic, None);
    let _ = writeln!(s, "{:<12} {:>24} {:>24} {:>24}", "(free)", full, diag, iso);
    if !(full <= diag + 1e-9 && diag <= iso + 1e-9) {
        violations.push("(free)".into());
    }
    if violations.is_empty() {
        let _ = writeln!(s, "nesting: ok");
    } else {
        let _ = writeln!(s, "nesting: violated for {}", violations.join(", "));
    }
    s
}

fn truncate(s: &str, width: usize) -> String {
    if s.chars().count() <= width {
        s.to_string()
    } else {
        let mut t: String = s.chars().take(width - 1).collect();
        t.push('…');
        t
    }
}

/// Static SVG scatter of the first two coordinates (the second is zero for
/// one-dimensional data), with the unit basis vectors drawn at the origin.
pub fn scatter_svg(points: &Matrix) -> String {
    const SIZE: f64 = 400.0;
    const MARGIN: f64 = 20.0;
    let xy: Vec<(f64, f64)> = points
        .row_iter()
        .map(|r| (r[0], r.get(1).copied().unwrap_or(0.0)))
        .collect();
    let extent = xy
        .iter()
        .fold(1.0f64, |acc, &(x, y)| acc.max(x.abs()).max(y.abs()))
        * 1.05;
    let scale = (SIZE / 2.0 - MARGIN) / extent;
    let c = SIZE / 2.0;
    let px = |x: f64| c + x * scale;
    let py = |y: f64| c - y * scale;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r##"<g fill="#1f77b4" fill-opacity="0.5">"##);
    for (x, y) in &xy {
        let _ = writeln!(s, r#"<circle cx="{:.3}" cy="{:.3}" r="1.5"/>"#, px(*x), py(*y));
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<g stroke="black" stroke-width="2"><line x1="{c}" y1="{c}" x2="{:.3}" y2="{c}"/><line x1="{c}" y1="{c}" x2="{c}" y2="{:.3}"/></g>"#,
        px(1.0),
        py(1.0)
    );
    let _ = writeln!(s, "</svg>");
    s
}
