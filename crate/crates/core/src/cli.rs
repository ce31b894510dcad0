//! Command-line front end.
//!
//! Every command prints a summary on stdout. With `--out` the primary result
//! is written to that file and a `<out>.manifest.json` run manifest is
//! written beside it. Numbers in summaries and tables carry six significant
//! digits; JSA data files keep full precision.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::dispersion::CrystalDatabase;
use crate::error::{Error, Result};
use crate::hom::{self, InterferingPair};
use crate::jsa::{self, GridSpan, JsaMatrix, PumpSpec};
use crate::phasematch::{self, PhaseMatchConfig, PmType};
use crate::schmidt;
use crate::sweep::{self, OptimizerSettings, SweepSpec};

/// Formats like C's `%.6g`.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Csv,
    JsonLines,
}

#[derive(Debug, Parser)]
#[command(name = "cpspdc", version, about = "Counter-propagating SPDC source design toolkit")]
pub struct Cli {
    /// Crystal database file (defaults to the packaged one).
    #[arg(long, global = true)]
    pub db: Option<PathBuf>,
    /// Primary output file; a run manifest is written next to it.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Group-velocity-matched wavelength, its poling period and tilt.
    Gvm {
        crystal: String,
        pm_type: String,
        /// Search interval in nm.
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
        bracket: Option<Vec<f64>>,
    },
    /// Poling period for degeneracy at a wavelength.
    Period {
        crystal: String,
        pm_type: String,
        lambda0_nm: f64,
    },
    /// JSA ridge tilt angle in degrees.
    Tilt {
        crystal: String,
        pm_type: String,
        lambda0_nm: f64,
    },
    /// Joint spectral amplitude with purity and marginal widths.
    Jsa(JsaArgs),
    /// HOM interference between heralded photons of one or two JSA files.
    Hom(HomArgs),
    /// Runs a TOML sweep specification.
    Sweep { spec: PathBuf },
    /// Grid search for the purity-maximizing crystal length and pump width.
    Optimize(OptimizeArgs),
    /// Loads and validates the crystal database.
    DbValidate,
}

#[derive(Debug, Args)]
pub struct JsaArgs {
    pub crystal: String,
    pub pm_type: String,
    #[arg(long = "lambda0", default_value_t = 1550.0)]
    pub lambda0_nm: f64,
    #[arg(long = "length", default_value_t = 5.0)]
    pub length_mm: f64,
    #[arg(long = "delta-lambda", default_value_t = 0.16)]
    pub delta_lambda_nm: f64,
    /// Grid points per axis.
    #[arg(long, default_value_t = jsa::DEFAULT_GRID_POINTS)]
    pub n: usize,
    /// Half-width of the sampling window in nm (default 15 nm·mm / L).
    #[arg(long = "half-span")]
    pub half_span_nm: Option<f64>,
    /// Write the JSA in the binary layout (also chosen by a `.bin` extension).
    #[arg(long)]
    pub binary: bool,
}

#[derive(Debug, Args)]
pub struct HomArgs {
    /// One file (identical sources) or two.
    #[arg(num_args = 1..=2, required = true)]
    pub files: Vec<PathBuf>,
    #[arg(long, default_value = "signal-signal")]
    pub pair: String,
    /// Delay range in ps.
    #[arg(long = "delay-range", num_args = 2, value_names = ["START", "STOP"], allow_negative_numbers = true)]
    pub delay_range: Option<Vec<f64>>,
    #[arg(long = "delay-points", default_value_t = hom::DEFAULT_DELAY_POINTS)]
    pub delay_points: usize,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    pub crystal: String,
    pub pm_type: String,
    #[arg(long = "lambda0", default_value_t = 1550.0)]
    pub lambda0_nm: f64,
    #[arg(long = "length-range", num_args = 2, value_names = ["LO", "HI"], default_values_t = [1.0, 20.0])]
    pub length_range_mm: Vec<f64>,
    #[arg(long = "delta-range", num_args = 2, value_names = ["LO", "HI"], default_values_t = [0.05, 0.5])]
    pub delta_range_nm: Vec<f64>,
    #[arg(long, default_value_t = sweep::OPTIMIZER_GRID)]
    pub grid: usize,
    #[arg(long, default_value_t = jsa::DEFAULT_GRID_POINTS)]
    pub n: usize,
}

/// Ordered key/value summary.
#[derive(Debug, Default, Clone)]
pub struct Record(Vec<(String, Value)>);

impl Record {
    fn num(mut self, key: &str, v: f64) -> Self {
        self.0.push((key.to_string(), number(v)));
        self
    }

    fn opt(self, key: &str, v: Option<f64>) -> Self {
        match v {
            Some(v) => self.num(key, v),
            None => self.text(key, ""),
        }
    }

    fn text(mut self, key: &str, v: impl Into<String>) -> Self {
        self.0.push((key.to_string(), Value::String(v.into())));
        self
    }

    fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => {
                let keys: Vec<&str> = self.0.iter().map(|(k, _)| k.as_str()).collect();
                let vals: Vec<String> = self.0.iter().map(|(_, v)| plain(v)).collect();
                format!("{}\n{}\n", keys.join(","), vals.join(","))
            }
            OutputFormat::JsonLines => {
                let map: Map<String, Value> = self.0.iter().cloned().collect();
                format!("{}\n", Value::Object(map))
            }
        }
    }
}

/// JSON number rounded to six significant digits.
fn number(v: f64) -> Value {
    sig6(v)
        .parse::<f64>()
        .ok()
        .and_then(serde_json::Number::from_f64)
        .map_or(Value::Null, Value::Number)
}

fn plain(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.as_f64().map_or_else(|| n.to_string(), sig6),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn database(cli: &Cli) -> Result<CrystalDatabase> {
    match &cli.db {
        Some(path) => CrystalDatabase::load(path),
        None => Ok(CrystalDatabase::packaged()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

fn write_manifest(out: &Path, db: &CrystalDatabase, cli: &Cli, parameters: Value) -> Result<()> {
    let command_line: Vec<String> = std::env::args().collect();
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = json!({
        "command_line": command_line,
        "database": cli.db.as_ref().map_or_else(|| "<packaged>".to_string(), |p| p.display().to_string()),
        "database_sha256": db.checksum(),
        "parameters": parameters,
        "format": cli.format,
        "tool": env!("CARGO_PKG_NAME"),
        "tool_version": env!("CARGO_PKG_VERSION"),
        "timestamp_unix": timestamp,
    });
    let path = sibling(out, ".manifest.json");
    let mut f = create(&path)?;
    serde_json::to_writer_pretty(&mut f, &manifest).map_err(|e| Error::io(&path, e.into()))?;
    writeln!(f).and_then(|_| f.flush()).map_err(|e| Error::io(&path, e))
}

fn emit_summary(record: &Record, format: OutputFormat, stdout: &mut dyn Write) -> Result<()> {
    stdout
        .write_all(record.render(format).as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

/// Runs a parsed command line, writing the summary to `stdout`.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    let db = database(cli)?;
    match &cli.command {
        Command::Gvm {
            crystal,
            pm_type,
            bracket,
        } => {
            let pm: PmType = pm_type.parse()?;
            let bracket = match bracket.as_deref() {
                Some([lo, hi]) => [*lo, *hi],
                _ => pm.default_gvm_bracket(),
            };
            let lambda = phasematch::gvm_wavelength(&db, crystal, pm, bracket)?;
            let period = phasematch::poling_period(&db, crystal, pm, lambda)?;
            let tilt = phasematch::tilt_angle(&db, crystal, pm, lambda)?;
            let record = Record::default()
                .text("crystal", crystal.as_str())
                .text("pm_type", pm.to_string())
                .num("lambda_gvm_nm", lambda)
                .num("period_nm", period)
                .num("tilt_deg", tilt);
            finish_record(cli, &db, &record, json!({"crystal": crystal, "pm_type": pm, "bracket_nm": bracket}), stdout)
        }
        Command::Period {
            crystal,
            pm_type,
            lambda0_nm,
        } => {
            let pm: PmType = pm_type.parse()?;
            let period = phasematch::poling_period(&db, crystal, pm, *lambda0_nm)?;
            let record = Record::default()
                .text("crystal", crystal.as_str())
                .text("pm_type", pm.to_string())
                .num("lambda0_nm", *lambda0_nm)
                .num("period_nm", period);
            finish_record(cli, &db, &record, json!({"crystal": crystal, "pm_type": pm, "lambda0_nm": lambda0_nm}), stdout)
        }
        Command::Tilt {
            crystal,
            pm_type,
            lambda0_nm,
        } => {
            let pm: PmType = pm_type.parse()?;
            let tilt = phasematch::tilt_angle(&db, crystal, pm, *lambda0_nm)?;
            let record = Record::default()
                .text("crystal", crystal.as_str())
                .text("pm_type", pm.to_string())
                .num("lambda0_nm", *lambda0_nm)
                .num("tilt_deg", tilt);
            finish_record(cli, &db, &record, json!({"crystal": crystal, "pm_type": pm, "lambda0_nm": lambda0_nm}), stdout)
        }
        Command::Jsa(args) => run_jsa(cli, &db, args, stdout),
        Command::Hom(args) => run_hom(cli, &db, args, stdout),
        Command::Sweep { spec } => run_sweep(cli, &db, spec, stdout),
        Command::Optimize(args) => run_optimize(cli, &db, args, stdout),
        Command::DbValidate => {
            for rec in db.records() {
                let [lo, hi] = rec.common_range();
                let record = Record::default()
                    .text("crystal", rec.name.as_str())
                    .text("composition", rec.composition.as_str())
                    .num("range_min_nm", lo)
                    .num("range_max_nm", hi)
                    .num("d_eff_type0_pm_per_v", rec.d_eff_type0)
                    .num("d_eff_type2_pm_per_v", rec.d_eff_type2)
                    .text("sha256", db.checksum());
                emit_summary(&record, cli.format, stdout)?;
            }
            Ok(())
        }
    }
}

/// Prints `record`; with `--out`, also writes it to the file plus a manifest.
fn finish_record(cli: &Cli, db: &CrystalDatabase, record: &Record, params: Value, stdout: &mut dyn Write) -> Result<()> {
    emit_summary(record, cli.format, stdout)?;
    if let Some(out) = &cli.out {
        let mut f = create(out)?;
        f.write_all(record.render(cli.format).as_bytes())
            .and_then(|_| f.flush())
            .map_err(|e| Error::io(out, e))?;
        write_manifest(out, db, cli, params)?;
    }
    Ok(())
}

fn run_jsa(cli: &Cli, db: &CrystalDatabase, args: &JsaArgs, stdout: &mut dyn Write) -> Result<()> {
    let pm: PmType = args.pm_type.parse()?;
    let config = PhaseMatchConfig::solved(db, &args.crystal, pm, args.lambda0_nm, args.length_mm)?;
    let pump = PumpSpec::new(args.lambda0_nm, args.delta_lambda_nm)?;
    let span = args.half_span_nm.map_or(GridSpan::Auto, GridSpan::HalfWidthNm);
    let grid = jsa::SpectralGrid::centered(args.lambda0_nm, span.half_width_nm(args.length_mm), args.n)?;
    let matrix = jsa::compute_jsa_on_grid(db, &config, &pump, grid)?;
    let decomposition = schmidt::decompose(&matrix)?;
    let (signal, idler) = jsa::marginal_spectra(&matrix)?;
    let tilt = phasematch::tilt_angle(db, &args.crystal, pm, args.lambda0_nm)?;
    let record = Record::default()
        .text("crystal", args.crystal.as_str())
        .text("pm_type", pm.to_string())
        .num("lambda0_nm", args.lambda0_nm)
        .num("length_mm", args.length_mm)
        .num("delta_lambda_nm", args.delta_lambda_nm)
        .num("period_nm", config.period_nm)
        .num("grid_points", args.n as f64)
        .num("half_span_nm", span.half_width_nm(args.length_mm))
        .num("purity", decomposition.purity())
        .num("schmidt_number", decomposition.schmidt_number())
        .num("tilt_deg", tilt)
        .num("signal_fwhm_nm", signal.fwhm_nm)
        .num("idler_fwhm_nm", idler.fwhm_nm)
        .num("pump_fwhm_nm", pump.fwhm_nm());
    emit_summary(&record, cli.format, stdout)?;
    if let Some(out) = &cli.out {
        let binary = args.binary || out.extension().is_some_and(|e| e == "bin");
        let mut f = create(out)?;
        let written = if binary {
            matrix.write_binary(&mut f)
        } else {
            matrix.write_csv(&mut f)
        };
        written.and_then(|_| f.flush()).map_err(|e| Error::io(out, e))?;
        let summary_path = sibling(out, ".summary");
        let mut s = create(&summary_path)?;
        s.write_all(record.render(cli.format).as_bytes())
            .and_then(|_| s.flush())
            .map_err(|e| Error::io(&summary_path, e))?;
        let params = json!({
            "crystal": args.crystal, "pm_type": pm, "lambda0_nm": args.lambda0_nm,
            "length_mm": args.length_mm, "delta_lambda_nm": args.delta_lambda_nm,
            "n": args.n, "half_span_nm": span.half_width_nm(args.length_mm), "binary": binary,
        });
        write_manifest(out, db, cli, params)?;
    }
    Ok(())
}

fn run_hom(cli: &Cli, db: &CrystalDatabase, args: &HomArgs, stdout: &mut dyn Write) -> Result<()> {
    let pair: InterferingPair = args.pair.parse()?;
    let f1 = JsaMatrix::load(&args.files[0])?;
    let f2 = match args.files.get(1) {
        Some(path) => JsaMatrix::load(path)?,
        None => f1.clone(),
    };
    let delays = match args.delay_range.as_deref() {
        Some([a, b]) => {
            if args.delay_points < 3 || !(b > a) {
                return Err(Error::validation("hom", "delay-range", "need START < STOP and at least 3 points"));
            }
            jsa::linspace(*a, *b, args.delay_points)
        }
        _ => hom::default_delays(&f1, pair),
    };
    let curve = hom::hom_curve(&f1, &f2, pair, &delays)?;
    let record = Record::default()
        .text("pair", pair.to_string())
        .num("visibility", curve.visibility)
        .num("baseline", curve.baseline)
        .num("minimum", curve.minimum)
        .opt("dip_fwhm_ps", curve.dip_fwhm_ps)
        .opt("half_depth_width_ps", curve.half_depth_width_ps);
    emit_summary(&record, cli.format, stdout)?;
    if let Some(out) = &cli.out {
        let mut f = create(out)?;
        let written = match cli.format {
            OutputFormat::Csv => curve.write_csv(&mut f),
            OutputFormat::JsonLines => curve.delays_ps.iter().zip(&curve.p4).try_for_each(|(t, p)| {
                writeln!(f, "{}", json!({"tau_ps": number(*t), "p4": number(*p)}))
            }),
        };
        written.and_then(|_| f.flush()).map_err(|e| Error::io(out, e))?;
        let summary_path = sibling(out, ".summary");
        let mut s = create(&summary_path)?;
        s.write_all(record.render(cli.format).as_bytes())
            .and_then(|_| s.flush())
            .map_err(|e| Error::io(&summary_path, e))?;
        let files: Vec<String> = args.files.iter().map(|p| p.display().to_string()).collect();
        let params = json!({
            "files": files, "pair": pair,
            "delay_start_ps": delays[0], "delay_stop_ps": delays[delays.len() - 1],
            "delay_points": delays.len(),
        });
        write_manifest(out, db, cli, params)?;
    }
    Ok(())
}

fn run_sweep(cli: &Cli, db: &CrystalDatabase, spec_path: &Path, stdout: &mut dyn Write) -> Result<()> {
    let spec = SweepSpec::load(spec_path)?;
    spec.validate(db)?;
    let mut sink: Box<dyn Write> = match &cli.out {
        Some(out) => Box::new(create(out)?),
        None => Box::new(&mut *stdout),
    };
    let sink_name = cli
        .out
        .as_ref()
        .map_or_else(|| PathBuf::from("<stdout>"), Clone::clone);
    let io_err = |e| Error::io(&sink_name, e);
    if cli.format == OutputFormat::Csv {
        let mut header: Vec<(&str, String)> = vec![
            ("spec", spec_path.display().to_string()),
            ("database_sha256", db.checksum().to_string()),
            ("crystals", spec.crystals.join(" ")),
            ("pm_type", spec.pm_type.to_string()),
            ("variable", spec.variable.to_string()),
            ("start", sig6(spec.start)),
            ("stop", sig6(spec.stop)),
            ("step", sig6(spec.step)),
            ("grid_points", spec.grid_points.to_string()),
            (
                "half_span_nm",
                spec.half_span_nm
                    .map_or_else(|| format!("auto ({} nm*mm / L)", sig6(jsa::SPAN_LENGTH_PRODUCT_NM_MM)), sig6),
            ),
        ];
        let mut fixed_lines = Vec::new();
        for name in &spec.crystals {
            let f = spec.per_crystal.get(name).cloned().unwrap_or_default();
            let pick = |own: Option<f64>, base: Option<f64>| own.or(base).map_or_else(|| "-".to_string(), sig6);
            fixed_lines.push(format!(
                "{name}: lambda0_nm={} length_mm={} delta_lambda_nm={}",
                pick(f.lambda0_nm, spec.fixed.lambda0_nm),
                pick(f.length_mm, spec.fixed.length_mm),
                pick(f.delta_lambda_nm, spec.fixed.delta_lambda_nm)
            ));
        }
        for line in &fixed_lines {
            header.push(("fixed", line.clone()));
        }
        sweep::write_header(&mut sink, &header).map_err(io_err)?;
        writeln!(sink, "{}", sweep::csv_columns(&spec.outputs).join(",")).map_err(io_err)?;
    }
    let mut count = 0usize;
    sweep::run_sweep(db, &spec, |row| {
        let line = match cli.format {
            OutputFormat::Csv => sweep::csv_row(&row, &spec.outputs),
            OutputFormat::JsonLines => row_json(&row).to_string(),
        };
        count += 1;
        writeln!(sink, "{line}").and_then(|_| sink.flush()).map_err(io_err)
    })?;
    drop(sink);
    if let Some(out) = &cli.out {
        let params = serde_json::to_value(&spec).unwrap_or(Value::Null);
        write_manifest(out, db, cli, params)?;
        emit_summary(
            &Record::default()
                .text("output", out.display().to_string())
                .num("rows", count as f64),
            cli.format,
            stdout,
        )?;
    }
    Ok(())
}

fn row_json(row: &sweep::SweepRow) -> Value {
    let mut map = Map::new();
    map.insert("crystal".into(), Value::String(row.crystal.clone()));
    let fields = [
        ("lambda0_nm", Some(row.lambda0_nm)),
        ("length_mm", row.length_mm),
        ("delta_lambda_nm", row.delta_lambda_nm),
        ("period_nm", row.period_nm),
        ("tilt_deg", row.tilt_deg),
        ("purity", row.purity),
        ("idler_fwhm_nm", row.idler_fwhm_nm),
        ("idler_fwhm_ghz", row.idler_fwhm_ghz),
    ];
    for (k, v) in fields {
        if let Some(v) = v {
            map.insert(k.into(), number(v));
        }
    }
    Value::Object(map)
}

fn run_optimize(cli: &Cli, db: &CrystalDatabase, args: &OptimizeArgs, stdout: &mut dyn Write) -> Result<()> {
    let pm: PmType = args.pm_type.parse()?;
    let pair = |v: &[f64]| [v[0], v[1]];
    let settings = OptimizerSettings {
        length_range_mm: pair(&args.length_range_mm),
        delta_lambda_range_nm: pair(&args.delta_range_nm),
        grid: args.grid,
        grid_points: args.n,
    };
    if settings.grid == 0 || settings.grid_points < 2 {
        return Err(Error::validation("optimize", "grid", "grid sizes must be positive (n ≥ 2)"));
    }
    let result = sweep::optimize_purity(db, &args.crystal, pm, args.lambda0_nm, &settings)?;
    let record = Record::default()
        .text("crystal", args.crystal.as_str())
        .text("pm_type", pm.to_string())
        .num("lambda0_nm", args.lambda0_nm)
        .num("best_length_mm", result.best_length_mm)
        .num("best_delta_lambda_nm", result.best_delta_lambda_nm)
        .num("best_purity", result.best_purity)
        .num("evaluations", result.evaluations.len() as f64);
    emit_summary(&record, cli.format, stdout)?;
    if let Some(out) = &cli.out {
        let mut f = create(out)?;
        let body = (|| -> io::Result<()> {
            match cli.format {
                OutputFormat::Csv => {
                    sweep::write_header(
                        &mut f,
                        &[
                            ("database_sha256", db.checksum().to_string()),
                            ("crystal", args.crystal.clone()),
                            ("pm_type", pm.to_string()),
                            ("lambda0_nm", sig6(args.lambda0_nm)),
                            ("length_range_mm", format!("{} {}", sig6(settings.length_range_mm[0]), sig6(settings.length_range_mm[1]))),
                            ("delta_lambda_range_nm", format!("{} {}", sig6(settings.delta_lambda_range_nm[0]), sig6(settings.delta_lambda_range_nm[1]))),
                            ("grid", settings.grid.to_string()),
                            ("grid_points", settings.grid_points.to_string()),
                        ],
                    )?;
                    writeln!(f, "length_mm,delta_lambda_nm,purity")?;
                    for e in &result.evaluations {
                        writeln!(f, "{},{},{}", sig6(e.length_mm), sig6(e.delta_lambda_nm), sig6(e.purity))?;
                    }
                }
                OutputFormat::JsonLines => {
                    for e in &result.evaluations {
                        writeln!(
                            f,
                            "{}",
                            json!({"length_mm": number(e.length_mm), "delta_lambda_nm": number(e.delta_lambda_nm), "purity": number(e.purity)})
                        )?;
                    }
                }
            }
            f.flush()
        })();
        body.map_err(|e| Error::io(out, e))?;
        let params = json!({
            "crystal": args.crystal, "pm_type": pm, "lambda0_nm": args.lambda0_nm, "settings": settings,
        });
        write_manifest(out, db, cli, params)?;
    }
    Ok(())
}
