use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use invop::applyplan::{apply, build_plan};
use invop::bench::{self, Rounding, DEFAULT_SIDES, LARGE_SIDE, TABLE1_ROUNDINGS};
use invop::cache::{self, Cache, CacheKey, Payload};
use invop::dense::{apply_dense, invert, residual_check, DenseMatrix};
use invop::grid::{build_uniform, Grid2D};
use invop::iterative::sor_solve;
use invop::quant::{quantize, sparsity_stats, QuantizedMatrix};
use invop::{Error, OpCounters, Result};

#[derive(Parser)]
#[command(
    name = "invop",
    version,
    about = "Direct 2-D Poisson solver with a quantized inverse"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct GridArgs {
    /// Square grid shorthand: nx = ny = n.
    #[arg(long, conflicts_with_all = ["nx", "ny"])]
    grid: Option<usize>,
    #[arg(long, requires = "ny")]
    nx: Option<usize>,
    #[arg(long, requires = "nx")]
    ny: Option<usize>,
}

impl GridArgs {
    fn resolve(self) -> Result<Grid2D> {
        match (self.grid, self.nx, self.ny) {
            (Some(n), _, _) => Grid2D::square(n),
            (None, Some(nx), Some(ny)) => Grid2D::new(nx, ny),
            _ => Err(Error::InvalidArgument(
                "a grid is required: --grid N or --nx NX --ny NY".into(),
            )),
        }
    }
}

#[derive(Args, Clone)]
struct CacheArgs {
    /// Matrix cache directory.
    #[arg(long, env = "INVOP_CACHE", default_value = "cache")]
    cache: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Problem {
    /// Built-in problem with a known polynomial solution.
    Eq4,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Format {
    Csv,
    Svg,
}

#[derive(Subcommand)]
enum Command {
    /// Build the system matrix (and optionally the right-hand side).
    Assemble {
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        cache: CacheArgs,
        /// Copy the matrix file here as well.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        problem: Option<Problem>,
        /// Where to write the right-hand side of --problem.
        #[arg(long, requires = "problem")]
        rhs_out: Option<PathBuf>,
    },
    /// Invert the system matrix and cache the inverse.
    Invert {
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        cache: CacheArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Round the cached inverse to a number of decimal digits.
    Quantize {
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        cache: CacheArgs,
        #[arg(long)]
        digits: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Multiply a matrix file by a vector file.
    Apply {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        vector: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Assemble, invert (or load from cache), optionally quantize, and apply.
    SolveDirect {
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        cache: CacheArgs,
        /// Round the inverse to this many digits; omit for the unrounded inverse.
        #[arg(long)]
        digits: Option<u32>,
        #[arg(long, value_enum, required_unless_present = "rhs")]
        problem: Option<Problem>,
        /// Right-hand side vector file, one value per line.
        #[arg(long, conflicts_with = "problem")]
        rhs: Option<PathBuf>,
        /// Write the solution vector here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve with successive over-relaxation.
    SolveSor {
        #[command(flatten)]
        grid: GridArgs,
        /// Relaxation factor; zero or negative selects the optimal value.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        omega: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 1_000_000)]
        max_iter: usize,
        #[arg(long, value_enum, required_unless_present = "rhs")]
        problem: Option<Problem>,
        #[arg(long, conflicts_with = "problem")]
        rhs: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Relative error of the direct solver over grid sides and roundings.
    BenchTable1 {
        #[command(flatten)]
        cache: CacheArgs,
        /// Include n = 81.
        #[arg(long)]
        large: bool,
        #[arg(long, value_delimiter = ',')]
        sides: Option<Vec<usize>>,
        /// Digits to round to; "none" for the unrounded inverse.
        #[arg(long, value_delimiter = ',')]
        digits: Option<Vec<Rounding>>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Operation counts of the shared-product multiply against N.
    BenchScaling {
        #[command(flatten)]
        cache: CacheArgs,
        #[arg(long)]
        large: bool,
        #[arg(long, value_delimiter = ',')]
        sides: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',', default_values_t = [2u32, 4, 6])]
        digits: Vec<u32>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("invop: {e}");
            ExitCode::FAILURE
        }
    }
}

fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            l.trim().parse::<f64>().map_err(|_| {
                Error::InvalidArgument(format!("{}:{}: not a number: {l:?}", path.display(), k + 1))
            })
        })
        .collect()
}

fn vector_text(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}\n")).collect()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn emit_text(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_text(path, text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn cached_inverse(cache: &Cache, grid: &Grid2D) -> Result<DenseMatrix> {
    let key = CacheKey::inverse(grid);
    if let Some(m) = cache.load_dense(key.clone())? {
        if m.dim() != grid.n_points() {
            return Err(Error::cache(
                cache.entry(key).path,
                "dimension does not match the grid",
            ));
        }
        return Ok(m);
    }
    let inverse = invert(build_uniform(grid)?)?;
    cache.store(key, &Payload::Dense(inverse.clone()))?;
    Ok(inverse)
}

fn cached_quantized(cache: &Cache, grid: &Grid2D, digits: u32) -> Result<QuantizedMatrix> {
    let key = CacheKey::quantized(grid, digits);
    if let Some(q) = cache.load_quantized(key.clone())? {
        if q.dim() != grid.n_points() || q.scale_digits() != digits {
            return Err(Error::cache(
                cache.entry(key).path,
                "contents do not match the key",
            ));
        }
        return Ok(q);
    }
    let q = quantize(&cached_inverse(cache, grid)?, digits)?;
    cache.store(key, &Payload::Quantized(q.clone()))?;
    Ok(q)
}

fn copy_to(out: Option<&Path>, payload: &Payload) -> Result<()> {
    if let Some(path) = out {
        cache::write(path, payload)?;
    }
    Ok(())
}

fn print_counters(c: OpCounters) {
    println!("multiplications {}", c.multiplications);
    println!("additions {}", c.additions);
}

fn problem_rhs(grid: &Grid2D, problem: Option<Problem>, rhs: Option<&Path>) -> Result<Vec<f64>> {
    let v = match (problem, rhs) {
        (Some(Problem::Eq4), _) => bench::test_problem_rhs(grid)?,
        (None, Some(path)) => read_vector(path)?,
        (None, None) => {
            return Err(Error::InvalidArgument("need --problem or --rhs".into()));
        }
    };
    if v.len() != grid.n_points() {
        return Err(Error::DimensionMismatch {
            expected: grid.n_points(),
            actual: v.len(),
        });
    }
    Ok(v)
}

fn default_sides(large: bool) -> Vec<usize> {
    let mut sides = DEFAULT_SIDES.to_vec();
    if large {
        sides.push(LARGE_SIDE);
    }
    sides
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Assemble {
            grid,
            cache,
            out,
            problem,
            rhs_out,
        } => {
            let grid = grid.resolve()?;
            let cache = Cache::new(cache.cache);
            let payload = Payload::Dense(build_uniform(&grid)?.into_dense());
            let entry = cache.store(CacheKey::operator(&grid), &payload)?;
            copy_to(out.as_deref(), &payload)?;
            println!("operator {}x{} N={}", grid.nx(), grid.ny(), grid.n_points());
            println!("cached {}", entry.path.display());
            if let (Some(_), Some(path)) = (problem, rhs_out) {
                write_text(&path, &vector_text(&problem_rhs(&grid, problem, None)?))?;
            }
            Ok(())
        }
        Command::Invert { grid, cache, out } => {
            let grid = grid.resolve()?;
            let cache = Cache::new(cache.cache);
            let inverse = cached_inverse(&cache, &grid)?;
            let residual = residual_check(build_uniform(&grid)?, &inverse)?;
            copy_to(out.as_deref(), &Payload::Dense(inverse))?;
            println!("inverse {}x{} N={}", grid.nx(), grid.ny(), grid.n_points());
            println!("residual {residual:e}");
            Ok(())
        }
        Command::Quantize {
            grid,
            cache,
            digits,
            out,
        } => {
            let grid = grid.resolve()?;
            let cache = Cache::new(cache.cache);
            let q = cached_quantized(&cache, &grid, digits)?;
            let (nnz, per_col) = sparsity_stats(&q);
            let n = q.dim();
            copy_to(out.as_deref(), &Payload::Quantized(q))?;
            println!(
                "quantized {}x{} N={n} digits={digits}",
                grid.nx(),
                grid.ny()
            );
            println!(
                "nonzeros {nnz} ({:.4} of entries)",
                nnz as f64 / (n * n) as f64
            );
            println!("distinct magnitudes {}", per_col.iter().sum::<usize>());
            Ok(())
        }
        Command::Apply {
            matrix,
            vector,
            out,
        } => {
            let x = read_vector(&vector)?;
            let (y, counters) = match cache::read(&matrix)? {
                Payload::Dense(m) => apply_dense(&m, &x)?,
                Payload::Quantized(q) => apply(&build_plan(&q), &x)?,
            };
            emit_text(out.as_deref(), &vector_text(&y))?;
            eprintln!(
                "counters: multiplications {} additions {}",
                counters.multiplications, counters.additions
            );
            Ok(())
        }
        Command::SolveDirect {
            grid,
            cache,
            digits,
            problem,
            rhs,
            out,
        } => {
            let grid = grid.resolve()?;
            let cache = Cache::new(cache.cache);
            let b = problem_rhs(&grid, problem, rhs.as_deref())?;
            let (u, counters) = match digits {
                Some(m) => apply(&build_plan(&cached_quantized(&cache, &grid, m)?), &b)?,
                None => apply_dense(&cached_inverse(&cache, &grid)?, &b)?,
            };
            let rounding = digits.map_or(Rounding::Unrounded, Rounding::Digits);
            println!(
                "grid {}x{} N={} digits={rounding}",
                grid.nx(),
                grid.ny(),
                grid.n_points()
            );
            print_counters(counters);
            if problem.is_some() {
                println!("relative_error {}", bench::relative_error(&u, &grid)?);
            }
            if let Some(path) = out {
                write_text(&path, &vector_text(&u))?;
            }
            Ok(())
        }
        Command::SolveSor {
            grid,
            omega,
            tol,
            max_iter,
            problem,
            rhs,
            out,
        } => {
            let grid = grid.resolve()?;
            let b = problem_rhs(&grid, problem, rhs.as_deref())?;
            let report = sor_solve(&grid, &b, omega, tol, max_iter)?;
            println!(
                "grid {}x{} N={} omega={}",
                grid.nx(),
                grid.ny(),
                grid.n_points(),
                report.omega
            );
            println!("iterations {}", report.iterations);
            println!("operations {}", report.operations);
            println!("converged {}", report.converged);
            println!("final_correction {:e}", report.final_correction);
            if problem.is_some() {
                println!(
                    "relative_error {}",
                    bench::relative_error(&report.solution, &grid)?
                );
            }
            if let Some(path) = out {
                write_text(&path, &vector_text(&report.solution))?;
            }
            if !report.converged {
                return Err(Error::InvalidArgument(format!(
                    "SOR did not converge within {max_iter} sweeps"
                )));
            }
            Ok(())
        }
        Command::BenchTable1 {
            cache,
            large,
            sides,
            digits,
            format,
            out,
        } => {
            let cache = Cache::new(cache.cache);
            let sides = sides.unwrap_or_else(|| default_sides(large));
            let roundings = digits.unwrap_or_else(|| TABLE1_ROUNDINGS.to_vec());
            let mut source = |g: &Grid2D| cached_inverse(&cache, g);
            let rows = bench::run_table1_with(&sides, &roundings, &mut source)?;
            match (format, out) {
                (Format::Csv, Some(path)) => bench::emit_table1_csv(&rows, &path),
                (Format::Svg, Some(path)) => bench::emit_table1_svg(&rows, &path),
                (Format::Csv, None) => emit_text(None, &bench::table1_csv(&rows)),
                (Format::Svg, None) => emit_text(None, &bench::svg_for_table1(&rows)),
            }
        }
        Command::BenchScaling {
            cache,
            large,
            sides,
            digits,
            format,
            out,
        } => {
            let cache = Cache::new(cache.cache);
            let sides = sides.unwrap_or_else(|| {
                let mut s: Vec<usize> = default_sides(large)
                    .into_iter()
                    .filter(|&n| n > 5)
                    .collect();
                s.dedup();
                s
            });
            let mut source = |g: &Grid2D| cached_inverse(&cache, g);
            let report = bench::run_scaling_with(&sides, &digits, &mut source)?;
            for fit in &report.fits {
                eprintln!(
                    "m={} slope(mult)={:.4} slope(add)={:.4} slope(naive mult)={:.4}",
                    fit.digits, fit.mult_slope, fit.add_slope, fit.naive_mult_slope
                );
            }
            match (format, out) {
                (Format::Csv, Some(path)) => bench::emit_csv(&report, &path),
                (Format::Svg, Some(path)) => bench::emit_svg(&report, &path),
                (Format::Csv, None) => emit_text(None, &bench::scaling_csv(&report)),
                (Format::Svg, None) => emit_text(None, &bench::svg_for_scaling(&report)),
            }
        }
    }
}
