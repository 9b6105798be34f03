use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bdtile_core::analysis::{
    bd_matching_feasible, divergence_constants, divergence_table, min_displacement, MatchingInstance, Side,
    DEFAULT_ROW_BUDGET,
};
use bdtile_core::construction::{NestedFamily, OmegaWord};
use bdtile_core::geometry::{Aabb, Patch, PlacedTile, Point};
use bdtile_core::io::{
    analysis_report, big_to_string, decimal, parse_points, parse_rational, parse_rule, parse_window, render_svg,
    report_json, table_entry, LoadedRule, SvgStyle,
};
use bdtile_core::scalar::{format_rational, format_scientific};
use bdtile_core::spectral::{
    count_difference_sequence, count_vector, spectral_report, substitution_matrix, Classification, CountVector,
    SpectralReport, SubstitutionMatrix, DEFAULT_TOLERANCE,
};
use bdtile_core::substitution::DEFAULT_TILE_BUDGET;
use bdtile_core::{Error, Rational, Scalar};
use clap::{Parser, Subcommand};
use num_traits::Signed;

const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_CRITICAL: u8 = 3;
const EXIT_BUDGET: u8 = 4;
const EXIT_INVARIANT: u8 = 5;

#[derive(Parser)]
#[command(name = "bdtile", version, about = "Exact analysis of self-similar box tilings")]
struct Cli {
    /// Worker threads for parallel expansion (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a rule file.
    Validate { rule: PathBuf },
    /// Spectrum, classification and construction constants.
    Analyze {
        rule: PathBuf,
        /// Write the report here instead of standard output.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Named patch playing the role of P (default: first named patch).
        #[arg(long)]
        p: Option<String>,
        /// Named patch playing the role of Q (default: second named patch).
        #[arg(long)]
        q: Option<String>,
        /// Include a divergence table for these two words.
        #[arg(long, requires = "eta")]
        omega: Option<String>,
        #[arg(long, requires = "omega")]
        eta: Option<String>,
        #[arg(long, default_value_t = 3)]
        mmax: usize,
        #[arg(long, default_value_t = DEFAULT_TILE_BUDGET)]
        budget: u64,
    },
    /// Tiles of rho^k(seed) meeting a window.
    Expand {
        rule: PathBuf,
        #[arg(long)]
        seed: String,
        #[arg(long)]
        k: u32,
        /// Corners as x0,y0,...,x1,y1,...
        #[arg(long, allow_hyphen_values = true)]
        window: String,
        #[arg(long)]
        svg: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TILE_BUDGET)]
        budget: u64,
    },
    /// Tile-count differences of rho^k(P) and rho^k(Q).
    Counts {
        rule: PathBuf,
        #[arg(long)]
        p: String,
        #[arg(long)]
        q: String,
        #[arg(long)]
        kmax: u32,
    },
    /// Tiles of the nested-patch tiling of a word meeting a window.
    Omega {
        rule: PathBuf,
        #[arg(long)]
        word: String,
        #[arg(long, allow_hyphen_values = true)]
        window: String,
        #[arg(long)]
        svg: Option<PathBuf>,
        #[arg(long)]
        p: Option<String>,
        #[arg(long)]
        q: Option<String>,
        #[arg(long, default_value_t = DEFAULT_TILE_BUDGET)]
        budget: u64,
    },
    /// Divergence table for two words.
    Bdtable {
        rule: PathBuf,
        #[arg(long)]
        omega: String,
        #[arg(long)]
        eta: String,
        #[arg(long, default_value_t = 3)]
        mmax: usize,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        p: Option<String>,
        #[arg(long)]
        q: Option<String>,
        #[arg(long, default_value_t = DEFAULT_ROW_BUDGET)]
        budget: u64,
    },
    /// Bounded-displacement matching between two point sets.
    Match {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        /// Test this cap; without it the least feasible cap is reported.
        #[arg(long)]
        cap: Option<String>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::BudgetExceeded { .. } => EXIT_BUDGET,
            Error::Invariant(_) => EXIT_INVARIANT,
            _ => EXIT_VALIDATION,
        };
        Failure::new(code, e.to_string())
    }
}

type Outcome = Result<u8, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new(EXIT_VALIDATION, format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::new(EXIT_VALIDATION, format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<LoadedRule, Failure> {
    parse_rule(&read(path)?).map_err(|e| Failure::new(EXIT_VALIDATION, format!("{}: {e}", path.display())))
}

fn spectrum(loaded: &LoadedRule) -> Result<(SubstitutionMatrix, SpectralReport), Failure> {
    let m = substitution_matrix(&loaded.rule);
    let volumes: Vec<Rational> = loaded.rule.prototiles.iter().map(|p| p.volume.clone()).collect();
    let report = spectral_report(&m, &volumes, loaded.rule.dimension, DEFAULT_TOLERANCE)?;
    Ok((m, report))
}

/// Names of the P and Q patches, defaulting to the first two named patches.
fn patch_names(loaded: &LoadedRule, p: Option<String>, q: Option<String>) -> Result<(String, String), Failure> {
    let mut names = loaded.named.keys().cloned();
    let p = p.or_else(|| names.next());
    let q = q.or_else(|| names.next());
    match (p, q) {
        (Some(p), Some(q)) => Ok((p, q)),
        _ => Err(Failure::new(EXIT_VALIDATION, "two named patches are needed (use --p and --q)")),
    }
}

fn family(loaded: &LoadedRule, report: &SpectralReport, p: &str, q: &str, budget: u64) -> Result<NestedFamily, Failure> {
    if report.classification != Classification::Continuum {
        return Err(Failure::new(
            EXIT_CRITICAL,
            format!("classification is {}; the construction needs the continuum regime", report.classification),
        ));
    }
    Ok(NestedFamily::from_seeds(&loaded.rule, loaded.patch(p)?, loaded.patch(q)?, report, budget)?)
}

fn word(text: &str) -> Result<OmegaWord, Failure> {
    OmegaWord::parse(text).map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))
}

fn print_census(loaded: &LoadedRule, patch: &Patch<Rational>) {
    let census = patch.census(loaded.rule.len());
    for (id, n) in loaded.ids.iter().zip(&census) {
        println!("{id}\t{n}");
    }
    println!("total\t{}", patch.len());
}

fn check_window_budget(loaded: &LoadedRule, window: &Aabb<Rational>, budget: u64) -> Result<(), Failure> {
    let estimate = (window.volume() / loaded.rule.min_prototile_volume()).ceil().to_integer();
    if estimate > budget.into() {
        return Err(Failure::new(
            EXIT_BUDGET,
            format!("window may hold about {estimate} tiles, budget is {budget}; use a smaller window or --budget"),
        ));
    }
    Ok(())
}

fn validate(rule: &Path) -> Outcome {
    let loaded = load(rule)?;
    eprintln!(
        "ok: {} prototiles in dimension {}, inflation {}",
        loaded.rule.len(),
        loaded.rule.dimension,
        format_rational(&loaded.rule.inflation)
    );
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn analyze(
    rule: &Path,
    json: Option<PathBuf>,
    p: Option<String>,
    q: Option<String>,
    omega: Option<String>,
    eta: Option<String>,
    mmax: usize,
    budget: u64,
) -> Outcome {
    let loaded = load(rule)?;
    let (m, report) = spectrum(&loaded)?;
    let critical = report.classification == Classification::Critical;
    let continuum = report.classification == Classification::Continuum;
    let mut built = None;
    let mut table = None;
    if continuum && (loaded.named.len() >= 2 || (p.is_some() && q.is_some())) {
        let (p, q) = patch_names(&loaded, p, q)?;
        let fam = family(&loaded, &report, &p, &q, budget)?;
        let constants = divergence_constants(&fam, &report)?;
        if let (Some(w1), Some(w2)) = (&omega, &eta) {
            table = Some(divergence_table(&fam, &report, &word(w1)?, &word(w2)?, mmax, budget)?);
        }
        built = Some((p, q, fam, constants));
    } else if omega.is_some() {
        return Err(Failure::new(EXIT_CRITICAL, format!("no divergence table in the {} regime", report.classification)));
    }
    let doc = analysis_report(
        &loaded.rule,
        &m,
        &report,
        built.as_ref().map(|(p, q, f, c)| (p.as_str(), q.as_str(), f, c)),
        table.as_ref(),
    );
    let text = report_json(&doc);
    match json {
        Some(path) => {
            write(&path, &text)?;
            println!("classification: {}", doc.classification);
        }
        None => print!("{text}"),
    }
    Ok(if critical { EXIT_CRITICAL } else { 0 })
}

fn expand(rule: &Path, seed: &str, k: u32, window: &str, svg: Option<PathBuf>, budget: u64) -> Outcome {
    let loaded = load(rule)?;
    let seed = loaded.prototile_index(seed)?;
    let window = parse_window(window, loaded.rule.dimension)?;
    check_window_budget(&loaded, &window, budget)?;
    let tile = PlacedTile::new(seed, Point::origin(loaded.rule.dimension));
    let patch = loaded.rule.expand_window(&tile, k, &window)?;
    print_census(&loaded, &patch);
    if let Some(path) = svg {
        write(&path, &render_svg(&patch, &loaded.rule.prototiles, &SvgStyle { origin_marker: true, ..Default::default() })?)?;
    }
    Ok(0)
}

fn counts(rule: &Path, p: &str, q: &str, kmax: u32) -> Outcome {
    let loaded = load(rule)?;
    let m = substitution_matrix(&loaded.rule);
    let n = loaded.rule.len();
    let vp = CountVector::from_census(&loaded.patch(p)?.census(n));
    let vq = CountVector::from_census(&loaded.patch(q)?.census(n));
    let volumes: Vec<Rational> = loaded.rule.prototiles.iter().map(|t| t.volume.clone()).collect();
    let diffs = count_difference_sequence(&m, &volumes, &vp, &vq, kmax)?;
    println!("k\t#{p}\t#{q}\tdifference");
    for (k, d) in diffs.iter().enumerate() {
        let a = count_vector(&m, &vp, k as u64).total();
        let b = count_vector(&m, &vq, k as u64).total();
        println!("{k}\t{}\t{}\t{}", big_to_string(&a), big_to_string(&b), big_to_string(d));
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn omega(
    rule: &Path,
    text: &str,
    window: &str,
    svg: Option<PathBuf>,
    p: Option<String>,
    q: Option<String>,
    budget: u64,
) -> Outcome {
    let loaded = load(rule)?;
    let (_, report) = spectrum(&loaded)?;
    let (p, q) = patch_names(&loaded, p, q)?;
    let fam = family(&loaded, &report, &p, &q, budget)?;
    let window = parse_window(window, loaded.rule.dimension)?;
    check_window_budget(&loaded, &window, budget)?;
    let tiling = fam.omega(word(text)?);
    let chain = tiling.chain_covering(&window)?;
    for level in &chain.chain {
        println!("# {level}");
    }
    let patch = fam.level_window(chain.top(), &window)?;
    print_census(&loaded, &patch);
    if let Some(path) = svg {
        write(&path, &render_svg(&patch, &loaded.rule.prototiles, &SvgStyle::for_chain(&chain))?)?;
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn bdtable(
    rule: &Path,
    w1: &str,
    w2: &str,
    mmax: usize,
    json: Option<PathBuf>,
    p: Option<String>,
    q: Option<String>,
    budget: u64,
) -> Outcome {
    let loaded = load(rule)?;
    let (_, report) = spectrum(&loaded)?;
    let (p, q) = patch_names(&loaded, p, q)?;
    let fam = family(&loaded, &report, &p, &q, DEFAULT_TILE_BUDGET)?;
    let table = divergence_table(&fam, &report, &word(w1)?, &word(w2)?, mmax, budget)?;
    let c = &table.constants;
    println!("omega = {}, eta = {}, a = {}, h = {}", table.omega, table.eta, fam.a, fam.h);
    println!(
        "c0 = {}, c2 = {}, c3 = {}, ratio = {}",
        format_rational(&c.c0),
        format_scientific(&c.c2, 6),
        format_rational(&c.c3),
        format_rational(&c.ratio)
    );
    println!("m\ti_m\tk\tboundary\tnested_difference\tlower_bound\tquotient\tdecomposition");
    for r in &table.rows {
        let (quotient, decomposition) = match &r.geometric {
            Some(g) => (
                format!("{} ({})", format_rational(&g.quotient), decimal(g.quotient.approx_f64(), 6)),
                (g.omega.decomposition_holds && g.eta.decomposition_holds).to_string(),
            ),
            None => ("-".to_string(), "-".to_string()),
        };
        let diff = if r.nested_difference.bits() > 64 {
            format_scientific(&Rational::from_integer(r.nested_difference.clone()), 6)
        } else {
            r.nested_difference.to_string()
        };
        let boundary = if r.boundary.bits() > 64 {
            format_scientific(&Rational::from_integer(r.boundary.clone()), 6)
        } else {
            r.boundary.to_string()
        };
        println!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.m,
            r.index,
            r.k,
            boundary,
            diff,
            format_scientific(&r.lower_bound, 6),
            quotient,
            decomposition
        );
    }
    if let Some(path) = json {
        let mut text = serde_json::to_string_pretty(&table_entry(&table)).expect("tables serialize");
        text.push('\n');
        write(&path, &text)?;
    }
    Ok(0)
}

fn matching(left: &Path, right: &Path, cap: Option<String>) -> Outcome {
    let points = |path: &Path| -> Result<Vec<Point<Rational>>, Failure> {
        parse_points(&read(path)?).map_err(|e| Failure::new(EXIT_VALIDATION, format!("{}: {e}", path.display())))
    };
    let left = points(left)?;
    let right = points(right)?;
    let fmt = |p: &Point<Rational>| p.to_string();
    match cap {
        Some(cap) => {
            let cap = parse_rational(&cap).map_err(|e| Failure::new(EXIT_USAGE, e))?;
            if cap.is_negative() {
                return Err(Failure::new(EXIT_USAGE, "cap must be non-negative"));
            }
            let inst = MatchingInstance { left, right, cap };
            let out = bd_matching_feasible(&inst);
            if let Some(m) = out.matching {
                println!("feasible");
                for (i, j) in m.iter().enumerate() {
                    println!("{}\t->\t{}", fmt(&inst.left[i]), fmt(&inst.right[*j]));
                }
            } else if let Some(cert) = out.certificate {
                let side = match cert.side {
                    Side::Left => "left",
                    Side::Right => "right",
                };
                println!("infeasible");
                println!(
                    "{} {side} points have only {} neighbours within the cap",
                    cert.subset.len(),
                    cert.neighbourhood.len()
                );
                println!("subset: {:?}", cert.subset);
                println!("neighbourhood: {:?}", cert.neighbourhood);
            }
        }
        None => {
            let d = min_displacement(&left, &right)?;
            match &d.exact {
                Some(e) => println!("min displacement {}", format_rational(e)),
                None => println!("min displacement sqrt({}) ~ {}", format_rational(&d.squared), decimal(d.approx(), 12)),
            }
        }
    }
    Ok(0)
}

fn run(cli: Cli) -> Outcome {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::new(EXIT_INVARIANT, e.to_string()))?;
    }
    match cli.command {
        Command::Validate { rule } => validate(&rule),
        Command::Analyze { rule, json, p, q, omega, eta, mmax, budget } => {
            analyze(&rule, json, p, q, omega, eta, mmax, budget)
        }
        Command::Expand { rule, seed, k, window, svg, budget } => expand(&rule, &seed, k, &window, svg, budget),
        Command::Counts { rule, p, q, kmax } => counts(&rule, &p, &q, kmax),
        Command::Omega { rule, word, window, svg, p, q, budget } => omega(&rule, &word, &window, svg, p, q, budget),
        Command::Bdtable { rule, omega, eta, mmax, json, p, q, budget } => {
            bdtable(&rule, &omega, &eta, mmax, json, p, q, budget)
        }
        Command::Match { left, right, cap } => matching(&left, &right, cap),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            e.print().ok();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
