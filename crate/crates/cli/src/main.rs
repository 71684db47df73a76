//! Command-line front end: input loading, configuration merging, artifact
//! writing, and the exit-code contract (0 pass, 1 verification failure,
//! 2 usage or contract error).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vinebraid::braid::Braid;
use vinebraid::diagram::{parse_pd, vogel_braid};
use vinebraid::pipeline::{
    apply_config_text, braid_json, build_geometry, diagram_svg, diagrams_csv, embed_report_text,
    extraction_json, geometry_json, geometry_obj, ouroboros_core, permutation_cycles_text, run,
    run_summary, verification_json, verification_text, vineyard_svg, PipelineConfig, PipelineRun,
    VineyardDump,
};
use vinebraid::{Error, Result};

#[derive(Parser)]
#[command(
    name = "vinebraid",
    version,
    about = "Embed braid closures near a twisted annulus, sweep persistence \
             vineyards, and recover the braid"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct InputOpts {
    /// Braid word, e.g. "3: 1 -2 1".
    #[arg(long, value_name = "WORD")]
    braid: Option<String>,
    /// Path to a planar-diagram code file.
    #[arg(long, value_name = "FILE")]
    pd: Option<PathBuf>,
    /// Use the built-in k-strand cyclic word, whose sweep monodromy has
    /// order exactly k.
    #[arg(long, value_name = "K")]
    ouroboros: Option<usize>,
}

impl InputOpts {
    fn core_word(&self) -> Result<Braid> {
        match (&self.braid, &self.pd, self.ouroboros) {
            (Some(w), None, None) => Braid::parse(w),
            (None, Some(path), None) => {
                let text = fs::read_to_string(path)?;
                Ok(vogel_braid(&parse_pd(&text)?).word)
            }
            (None, None, Some(k)) => ouroboros_core(k),
            _ => Err(Error::Invalid(
                "exactly one of --braid, --pd, --ouroboros is required".into(),
            )),
        }
    }
}

#[derive(Args)]
struct ParamOpts {
    /// Flat key=value configuration file, applied under the flags below.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Annulus radius.
    #[arg(long, value_name = "R")]
    radius: Option<f64>,
    /// Radial thickness of the embedded braid band.
    #[arg(long, value_name = "E")]
    eps: Option<f64>,
    /// Offset of the observation loop from the annulus.
    #[arg(long, value_name = "H")]
    eta: Option<f64>,
    /// Bound on the angle strands make against the azimuthal direction.
    #[arg(long, value_name = "A")]
    theta_b: Option<f64>,
    /// Sweep steps per revolution.
    #[arg(long, value_name = "N")]
    sweep: Option<usize>,
    /// Seed for the genericity jitter.
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
}

impl ParamOpts {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)?;
            apply_config_text(&text, &mut cfg)?;
        }
        if let Some(v) = self.radius {
            cfg.params.radius = v;
        }
        if let Some(v) = self.eps {
            cfg.params.eps = v;
        }
        if let Some(v) = self.eta {
            cfg.params.eta = v;
        }
        if let Some(v) = self.theta_b {
            cfg.params.theta_b = v;
        }
        if let Some(v) = self.sweep {
            cfg.sweep = v;
        }
        if let Some(v) = self.seed {
            cfg.params.seed = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct OutputOpts {
    /// Directory artifacts are written into.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Comma-separated artifact kinds: json, csv, svg, obj.
    #[arg(long, value_name = "KINDS", default_value = "json,csv,svg,obj")]
    emit: String,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a braid word or planar-diagram code and report its invariants.
    Parse {
        #[command(flatten)]
        input: InputOpts,
    },
    /// Turn a planar-diagram code into a braid word (Vogel's algorithm).
    Vogel {
        /// Path to a planar-diagram code file.
        #[arg(long, value_name = "FILE")]
        pd: PathBuf,
    },
    /// Embed the closure near the twisted annulus and validate it.
    Construct {
        #[command(flatten)]
        input: InputOpts,
        #[command(flatten)]
        params: ParamOpts,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Sweep the observation loop and write the vineyard artifacts.
    Sweep {
        #[command(flatten)]
        input: InputOpts,
        #[command(flatten)]
        params: ParamOpts,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Print the revolution monodromy of the swept vineyard.
    Monodromy {
        #[command(flatten)]
        input: InputOpts,
        #[command(flatten)]
        params: ParamOpts,
    },
    /// Re-extract a braid word from the sweep and verify the round trip.
    Extract {
        #[command(flatten)]
        input: InputOpts,
        #[command(flatten)]
        params: ParamOpts,
    },
    /// Run the whole pipeline and write every artifact.
    Pipeline {
        #[command(flatten)]
        input: InputOpts,
        #[command(flatten)]
        params: ParamOpts,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Render SVG plots from a vineyard JSON file.
    Plot {
        /// Vineyard JSON produced by `sweep` or `pipeline`.
        #[arg(value_name = "VINEYARD")]
        vineyard: PathBuf,
        /// Directory plots are written into.
        #[arg(long, value_name = "DIR", default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Default)]
struct EmitSet {
    json: bool,
    csv: bool,
    svg: bool,
    obj: bool,
}

fn parse_emit(text: &str) -> Result<EmitSet> {
    let mut set = EmitSet::default();
    for kind in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match kind {
            "json" => set.json = true,
            "csv" => set.csv = true,
            "svg" => set.svg = true,
            "obj" => set.obj = true,
            other => {
                return Err(Error::Invalid(format!(
                    "unknown emit kind `{other}` (expected json, csv, svg, obj)"
                )))
            }
        }
    }
    Ok(set)
}

fn main() -> ExitCode {
    configure_threads();
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Caps the sweep's parallelism when VINEBRAID_THREADS is set.
fn configure_threads() {
    let Ok(raw) = std::env::var("VINEBRAID_THREADS") else {
        return;
    };
    match raw.trim().parse::<usize>() {
        Ok(n) if n >= 1 => {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        _ => eprintln!("warning: ignoring invalid VINEBRAID_THREADS value `{raw}`"),
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Parse { input } => cmd_parse(&input),
        Command::Vogel { pd } => cmd_vogel(&pd),
        Command::Construct {
            input,
            params,
            output,
        } => cmd_construct(&input, &params, &output),
        Command::Sweep {
            input,
            params,
            output,
        } => cmd_sweep(&input, &params, &output),
        Command::Monodromy { input, params } => cmd_monodromy(&input, &params),
        Command::Extract { input, params } => cmd_extract(&input, &params),
        Command::Pipeline {
            input,
            params,
            output,
        } => cmd_pipeline(&input, &params, &output),
        Command::Plot { vineyard, out } => cmd_plot(&vineyard, &out),
    }
}

fn write_file(dir: &Path, name: &str, content: String, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, content)?;
    written.push(path);
    Ok(())
}

fn report_written(written: &[PathBuf]) {
    for path in written {
        println!("wrote {}", path.display());
    }
}

fn exit_by_verdict(done: &PipelineRun) -> ExitCode {
    if done.verification.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn print_linking(matrix: &[Vec<i64>]) {
    println!("linking matrix:");
    for row in matrix {
        println!("  {row:?}");
    }
}

fn cmd_parse(input: &InputOpts) -> Result<ExitCode> {
    if let Some(path) = &input.pd {
        if input.braid.is_some() || input.ouroboros.is_some() {
            return Err(Error::Invalid(
                "exactly one of --braid, --pd, --ouroboros is required".into(),
            ));
        }
        let d = parse_pd(&fs::read_to_string(path)?)?;
        println!("crossings:       {}", d.crossing_count());
        println!("arcs:            {}", d.arc_count());
        println!("components:      {}", d.components().len());
        println!("writhe:          {}", d.writhe());
        println!(
            "seifert circles: {}",
            vinebraid::diagram::seifert_circles(&d).circles.len()
        );
        print_linking(&d.linking_matrix());
        return Ok(ExitCode::SUCCESS);
    }
    let word = input.core_word()?;
    let info = word.closure_info();
    println!("word:        {word}");
    println!("strands:     {}", word.strands());
    println!("letters:     {}", word.letters().len());
    println!("writhe:      {}", word.writhe());
    println!("components:  {}", info.component_count());
    println!("cycle type:  {:?}", info.cycle_type());
    print_linking(&info.linking);
    Ok(ExitCode::SUCCESS)
}

fn cmd_vogel(pd: &Path) -> Result<ExitCode> {
    let d = parse_pd(&fs::read_to_string(pd)?)?;
    let crossings = d.crossing_count();
    let outcome = vogel_braid(&d);
    let p = outcome.input_circles;
    let op_bound = p.saturating_sub(1) * p.saturating_sub(2) / 2;
    let letter_bound = crossings + p.saturating_sub(1) * p.saturating_sub(2);
    let letters = outcome.word.letters().len();
    let ok = outcome.operations <= op_bound && letters <= letter_bound;
    println!("{}", outcome.word);
    println!("seifert circles:  {p}");
    println!("slide operations: {} (bound {op_bound})", outcome.operations);
    println!("letters:          {letters} (bound {letter_bound})");
    println!("bounds respected: {}", if ok { "yes" } else { "NO" });
    Ok(ExitCode::SUCCESS)
}

fn cmd_construct(input: &InputOpts, params: &ParamOpts, output: &OutputOpts) -> Result<ExitCode> {
    let core = input.core_word()?;
    let cfg = params.resolve()?;
    let emit = parse_emit(&output.emit)?;
    let g = build_geometry(&core, &cfg)?;
    fs::create_dir_all(&output.out)?;
    let mut written = Vec::new();
    if emit.json {
        write_file(&output.out, "braid.json", braid_json(&g.core)?, &mut written)?;
        write_file(
            &output.out,
            "braid_augmented.json",
            braid_json(&g.augmented)?,
            &mut written,
        )?;
        write_file(
            &output.out,
            "geometry.json",
            geometry_json(&g.link)?,
            &mut written,
        )?;
    }
    if emit.obj {
        write_file(
            &output.out,
            "geometry.obj",
            geometry_obj(&g.link),
            &mut written,
        )?;
    }
    for line in &g.escalations {
        println!("escalated {line}");
    }
    print!("{}", embed_report_text(&g.embed_report));
    report_written(&written);
    Ok(if g.embed_report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_sweep(input: &InputOpts, params: &ParamOpts, output: &OutputOpts) -> Result<ExitCode> {
    let core = input.core_word()?;
    let cfg = params.resolve()?;
    let emit = parse_emit(&output.emit)?;
    let done = run(&core, &cfg)?;
    fs::create_dir_all(&output.out)?;
    let mut written = Vec::new();
    let dump = VineyardDump::from_run(&done);
    if emit.json {
        write_file(&output.out, "vineyard.json", dump.to_json()?, &mut written)?;
    }
    if emit.csv {
        write_file(
            &output.out,
            "diagrams.csv",
            diagrams_csv(&done.vineyard),
            &mut written,
        )?;
    }
    if emit.svg {
        write_file(&output.out, "vineyard.svg", vineyard_svg(&dump), &mut written)?;
        write_file(
            &output.out,
            "diagram_t0.svg",
            diagram_svg(&done.vineyard.diagrams[0]),
            &mut written,
        )?;
    }
    for line in &done.escalations {
        println!("escalated {line}");
    }
    println!("sweep steps:     {}", done.sweep_used);
    println!(
        "diagram points:  {} at t = 0",
        done.vineyard.diagrams[0].points.len()
    );
    println!("vines:           {}", done.vines.len());
    println!("monodromy order: {}", done.monodromy.order);
    report_written(&written);
    Ok(ExitCode::SUCCESS)
}

fn cmd_monodromy(input: &InputOpts, params: &ParamOpts) -> Result<ExitCode> {
    let core = input.core_word()?;
    let cfg = params.resolve()?;
    let done = run(&core, &cfg)?;
    println!("monodromy order: {}", done.monodromy.order);
    println!(
        "permutation:     {}",
        permutation_cycles_text(&done.monodromy.permutation)
    );
    println!("vine orders:     {:?}", done.monodromy.vine_orders);
    Ok(ExitCode::SUCCESS)
}

fn cmd_extract(input: &InputOpts, params: &ParamOpts) -> Result<ExitCode> {
    let core = input.core_word()?;
    let cfg = params.resolve()?;
    let done = run(&core, &cfg)?;
    println!("extracted word:   {}", done.extracted.word);
    println!(
        "spurious unknots: {}",
        done.extracted.spurious_vines.len()
    );
    print!("{}", verification_text(&done.verification));
    Ok(exit_by_verdict(&done))
}

fn cmd_pipeline(input: &InputOpts, params: &ParamOpts, output: &OutputOpts) -> Result<ExitCode> {
    let core = input.core_word()?;
    let cfg = params.resolve()?;
    let emit = parse_emit(&output.emit)?;
    let done = run(&core, &cfg)?;
    fs::create_dir_all(&output.out)?;
    let mut written = Vec::new();
    let dump = VineyardDump::from_run(&done);
    if emit.json {
        write_file(&output.out, "braid.json", braid_json(&done.core)?, &mut written)?;
        write_file(
            &output.out,
            "braid_augmented.json",
            braid_json(&done.augmented)?,
            &mut written,
        )?;
        write_file(
            &output.out,
            "geometry.json",
            geometry_json(&done.link)?,
            &mut written,
        )?;
        write_file(&output.out, "vineyard.json", dump.to_json()?, &mut written)?;
        write_file(
            &output.out,
            "extraction.json",
            extraction_json(&done)?,
            &mut written,
        )?;
        write_file(
            &output.out,
            "verification.json",
            verification_json(&done.verification)?,
            &mut written,
        )?;
    }
    if emit.csv {
        write_file(
            &output.out,
            "diagrams.csv",
            diagrams_csv(&done.vineyard),
            &mut written,
        )?;
    }
    if emit.svg {
        write_file(&output.out, "vineyard.svg", vineyard_svg(&dump), &mut written)?;
        write_file(
            &output.out,
            "diagram_t0.svg",
            diagram_svg(&done.vineyard.diagrams[0]),
            &mut written,
        )?;
    }
    if emit.obj {
        write_file(
            &output.out,
            "geometry.obj",
            geometry_obj(&done.link),
            &mut written,
        )?;
    }
    write_file(
        &output.out,
        "extracted.txt",
        format!("{}\n", done.extracted.word),
        &mut written,
    )?;
    write_file(
        &output.out,
        "verification.txt",
        verification_text(&done.verification),
        &mut written,
    )?;
    print!("{}", run_summary(&done));
    report_written(&written);
    Ok(exit_by_verdict(&done))
}

fn cmd_plot(vineyard: &Path, out: &Path) -> Result<ExitCode> {
    let dump = VineyardDump::from_json(&fs::read_to_string(vineyard)?)?;
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    write_file(out, "vineyard.svg", vineyard_svg(&dump), &mut written)?;
    if let Some(d0) = dump.diagrams.first() {
        write_file(out, "diagram_t0.svg", diagram_svg(d0), &mut written)?;
    }
    report_written(&written);
    Ok(ExitCode::SUCCESS)
}
