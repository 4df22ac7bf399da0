//! Command-line interface: verification, Simpson checks, frame
//! generation, counting tables, exploration/extraction pipelines and
//! census runs. JSON goes to standard output; exit code 0 means the
//! checked property holds, 1 that it fails, 2 that the input was bad.

use clap::{Args, Parser, Subcommand};
use coversys::arith::FactoredModulus;
use coversys::census::{
    enumerate_minimal_covers, shard_and_merge, write_census, CensusOptions, CensusRecord,
};
use coversys::cover::{simpson_bound, CoverSystem, DEFAULT_SIEVE_CAP};
use coversys::error::Error;
use coversys::frames::{
    g_values, q_trend, q_value, q_value_restricted, tau_default, ArithOrdering, FrameFamily,
};
use coversys::io::{json_f64, system_json, SystemFile};
use coversys::structure::{explore_and_extract, NodeVerdict, StructureParams};
use serde_json::{json, Value};
use std::io::Read;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "coversys",
    about = "Exact tooling for covering systems of the integers",
    version
)]
struct Cli {
    /// Seed for randomized test subcommands (reserved; deterministic
    /// subcommands ignore it).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Print elapsed wall time to standard error.
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check that a system covers every point; exit 1 with a witness
    /// otherwise.
    Verify { file: String },
    /// Check minimality (every plane has a private point).
    Minimal {
        file: String,
        /// Also emit the deterministic minimal subcover.
        #[arg(long)]
        subcover: bool,
    },
    /// Compare the system size against the Simpson bound of its lcm.
    Simpson {
        file: String,
        /// Also check the fixed-set inequality for every proper subset
        /// of the fixed coordinates (needs a minimal cover).
        #[arg(long)]
        geometric: bool,
    },
    /// Generate the frame family of a modulus.
    FrameGen {
        /// Factored modulus, e.g. 2^2*3 (a bare integer is factored).
        #[arg(long = "N")]
        modulus: String,
        /// Enumerate and verify the whole family.
        #[arg(long)]
        enumerate: bool,
        /// Emit the system at one index of the enumeration.
        #[arg(long)]
        index: Option<u128>,
    },
    /// The log-family-count of a modulus under the canonical ordering.
    Qvalue {
        #[arg(long = "N")]
        modulus: String,
        /// Also report the large-prime restriction at this threshold.
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Growth-trend table of the count exponent along the canonical
    /// ordering.
    Asymptotics {
        #[arg(long, default_value_t = 2000)]
        x_max: u64,
        #[arg(long, default_value_t = 50)]
        x_min: u64,
        #[arg(long, default_value_t = 1)]
        step: u64,
        /// Emit CSV instead of JSON.
        #[arg(long)]
        csv: bool,
    },
    /// Build and validate the exploration tree of a minimal cover.
    Explore {
        file: String,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Run the full pipeline and emit the extracted generalized frame.
    Extract {
        file: String,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Exhaustively enumerate minimal covering systems of one size.
    Enumerate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        keep_systems: bool,
        #[arg(long, default_value_t = 1)]
        shards: u64,
        /// Directory for JSON-lines shards and the manifest.
        #[arg(long)]
        out: Option<String>,
        #[arg(long)]
        distinct_moduli: bool,
        #[arg(long, default_value_t = coversys::census::DEFAULT_CENSUS_CAP)]
        cap: usize,
    },
}

#[derive(Args)]
struct ParamArgs {
    /// Cover-size ratio bound of strict mode.
    #[arg(long = "C", default_value_t = 4.0)]
    c: f64,
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    /// Free mode: take delta and lambda directly instead of deriving
    /// them.
    #[arg(long)]
    free: bool,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
}

impl ParamArgs {
    fn build(&self) -> Result<StructureParams, Error> {
        if self.free {
            let delta = self
                .delta
                .ok_or_else(|| Error::InvalidInput("free mode needs --delta".into()))?;
            let lambda = self
                .lambda
                .ok_or_else(|| Error::InvalidInput("free mode needs --lambda".into()))?;
            StructureParams::free(lambda, self.eps, delta)
        } else {
            StructureParams::strict(self.c, self.eps)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let start = Instant::now();
    let code = match run(&cli.command) {
        Ok((value, code)) => {
            println!("{value}");
            code
        }
        Err(e) => {
            println!("{}", json!({ "error": e.to_string() }));
            2
        }
    };
    if cli.timing {
        eprintln!("elapsed: {:.3} ms", start.elapsed().as_secs_f64() * 1e3);
    }
    std::process::exit(code);
}

fn read_system(path: &str) -> Result<CoverSystem, Error> {
    let text = if path == "-" {
        let mut buf = String::new();
        std::io::stdin().read_to_string(&mut buf)?;
        buf
    } else {
        std::fs::read_to_string(path)?
    };
    SystemFile::parse(&text)?.to_cover_system()
}

fn witness_json(witness: &coversys::cover::PointWitness) -> Value {
    match witness.integer {
        Some(x) => json!(x),
        None => json!(witness.point),
    }
}

fn run(command: &Command) -> Result<(Value, i32), Error> {
    match command {
        Command::Verify { file } => {
            let system = read_system(file)?;
            let report = system.coverage_report(DEFAULT_SIEVE_CAP)?;
            match report.witness {
                None => Ok((json!({ "covers": true }), 0)),
                Some(w) => Ok((json!({ "covers": false, "witness": witness_json(&w) }), 1)),
            }
        }
        Command::Minimal { file, subcover } => {
            let system = read_system(file)?;
            let coverage = system.coverage_report(DEFAULT_SIEVE_CAP)?;
            if let Some(w) = coverage.witness {
                return Ok((
                    json!({ "covers": false, "minimal": false, "witness": witness_json(&w) }),
                    1,
                ));
            }
            let report = system.minimality_report(DEFAULT_SIEVE_CAP)?;
            let mut out = json!({
                "covers": true,
                "minimal": report.minimal,
            });
            if report.minimal {
                out["witnesses"] = Value::Array(
                    report
                        .witnesses
                        .iter()
                        .map(|w| witness_json(w.as_ref().unwrap()))
                        .collect(),
                );
            } else {
                out["redundant"] = json!(report.redundant);
            }
            if *subcover {
                let sub = system.minimal_subcover(DEFAULT_SIEVE_CAP)?;
                out["subcover"] = system_json(&sub)?;
            }
            Ok((out, if report.minimal { 0 } else { 1 }))
        }
        Command::Simpson { file, geometric } => {
            let system = read_system(file)?;
            let report = system.simpson_check();
            let mut out = serde_json::to_value(report)?;
            let mut code = if report.size >= report.bound { 0 } else { 1 };
            if *geometric {
                let fixed = system.fixed_coords();
                let coords = fixed.to_vec();
                let mut checked = 0u64;
                let mut all_hold = true;
                for mask in 0..(1u64 << coords.len()) - 1 {
                    let subset = coversys::space::CoordSet::from_iter(
                        coords
                            .iter()
                            .enumerate()
                            .filter(|(b, _)| mask & (1 << b) != 0)
                            .map(|(_, &c)| c),
                    );
                    checked += 1;
                    if !system.geometric_simpson_check(subset, DEFAULT_SIEVE_CAP)? {
                        all_hold = false;
                    }
                }
                out["geometric"] = json!({ "checked": checked, "all_hold": all_hold });
                if !all_hold {
                    code = 1;
                }
            }
            Ok((out, code))
        }
        Command::FrameGen {
            modulus,
            enumerate,
            index,
        } => {
            let modulus = FactoredModulus::parse(modulus)?;
            let ordering = ArithOrdering::canonical(&modulus);
            let family = FrameFamily::new(&modulus, &ordering)?;
            let count = family.count()?;
            let q = q_value(&ordering);
            if let Some(i) = index {
                let system = family.system(*i)?;
                return Ok((
                    json!({
                        "N": modulus.to_string(),
                        "count": count.to_string(),
                        "index": i.to_string(),
                        "system": system_json(&system)?,
                    }),
                    0,
                ));
            }
            if *enumerate {
                if family.crt().space().points() > 1_000_000 {
                    return Err(Error::SpaceTooLarge {
                        points: family.crt().space().points(),
                        cap: 1_000_000,
                    });
                }
                let expected = q.exp().round() as u128;
                let bound = simpson_bound(&modulus);
                let mut systems = Vec::new();
                let mut seen = std::collections::HashSet::new();
                let mut all_ok = true;
                for sys in family.iter()? {
                    let sys = sys?;
                    let ok = sys.len() as u64 == bound
                        && sys.is_minimal()?
                        && sys.lcm()? == modulus
                        && seen.insert(sys.planes().to_vec());
                    all_ok &= ok;
                    systems.push(system_json(&sys)?);
                }
                let out = json!({
                    "N": modulus.to_string(),
                    "Q": json_f64(q),
                    "count": count.to_string(),
                    "expected_count": expected.to_string(),
                    "simpson_bound": bound,
                    "all_verified": all_ok,
                    "systems": systems,
                });
                return Ok((out, if all_ok && count == expected { 0 } else { 1 }));
            }
            Ok((
                json!({
                    "N": modulus.to_string(),
                    "Q": json_f64(q),
                    "count": count.to_string(),
                }),
                0,
            ))
        }
        Command::Qvalue { modulus, delta } => {
            let modulus = FactoredModulus::parse(modulus)?;
            let ordering = ArithOrdering::canonical(&modulus);
            let q = q_value(&ordering);
            let mut out = json!({
                "N": modulus.to_string(),
                "Q": json_f64(q),
            });
            if let Some(d) = delta {
                let (g, g_delta) = g_values(&modulus, *d);
                out["delta"] = json_f64(*d);
                out["Q_delta"] = json_f64(q_value_restricted(&ordering, *d));
                out["G"] = json!(g);
                out["G_delta"] = json!(g_delta);
            }
            Ok((out, 0))
        }
        Command::Asymptotics {
            x_max,
            x_min,
            step,
            csv,
        } => {
            if *x_min < 2 || x_max < x_min || *step == 0 {
                return Err(Error::InvalidInput(
                    "need 2 <= x-min <= x-max and a positive step".into(),
                ));
            }
            let grid: Vec<f64> = (*x_min..=*x_max)
                .step_by(*step as usize)
                .map(|x| x as f64)
                .collect();
            let points = q_trend(&grid);
            if *csv {
                let mut lines = vec!["x,n,Q,ratio".to_string()];
                for p in &points {
                    lines.push(format!(
                        "{},{},{},{}",
                        p.x,
                        p.n,
                        coversys::io::sig15(p.q),
                        coversys::io::sig15(p.ratio)
                    ));
                }
                return Ok((Value::String(lines.join("\n")), 0));
            }
            let tau = tau_default();
            let target = 4.0 * tau.tau.sqrt() / 3.0;
            let rows: Vec<Value> = points
                .iter()
                .map(|p| {
                    json!({
                        "x": p.x,
                        "n": p.n,
                        "Q": json_f64(p.q),
                        "ratio": json_f64(p.ratio),
                    })
                })
                .collect();
            Ok((
                json!({
                    "tau": json_f64(tau.tau),
                    "target": json_f64(target),
                    "points": rows,
                }),
                0,
            ))
        }
        Command::Explore { file, params } => {
            let system = read_system(file)?;
            let params = params.build()?;
            match coversys::structure::build_exploration_tree(&system, &params) {
                Ok(tree) => {
                    let vertices: Vec<Value> = tree
                        .nodes
                        .iter()
                        .enumerate()
                        .map(|(id, node)| {
                            let (verdict, frame, garbage) = match &node.verdict {
                                NodeVerdict::Good { frame } => ("good", frame.len(), 0),
                                NodeVerdict::Bad { garbage } => ("bad", 0, garbage.len()),
                            };
                            json!({
                                "id": id,
                                "parent": node.parent,
                                "anchor": node.anchor,
                                "coords": node.coords.to_vec(),
                                "explored": node.explored,
                                "verdict": verdict,
                                "frame_size": frame,
                                "garbage_size": garbage,
                            })
                        })
                        .collect();
                    Ok((
                        json!({
                            "built": true,
                            "valid": tree.validate().is_ok(),
                            "vertices": vertices,
                        }),
                        0,
                    ))
                }
                Err(Error::NoVerdict { coords }) => {
                    Ok((json!({ "built": false, "stuck_at": coords }), 1))
                }
                Err(e) => Err(e),
            }
        }
        Command::Extract { file, params } => {
            let system = read_system(file)?;
            let params = params.build()?;
            let (_, tf, gf) = explore_and_extract(&system, &params)?;
            let check = gf.verify();
            let layers: Vec<Vec<Value>> = gf
                .layers
                .iter()
                .map(|layer| {
                    layer
                        .iter()
                        .map(|h| serde_json::to_value(h).unwrap())
                        .collect()
                })
                .collect();
            let data = gf.data.as_ref().unwrap();
            let target = (1.0 - params.eps_target)
                * system
                    .space()
                    .sizes()
                    .iter()
                    .map(|&s| (s - 1) as f64)
                    .sum::<f64>();
            let total = gf.total_layer_size();
            let out = json!({
                "frame": {
                    "order": data.order,
                    "scopes": data.scopes.iter().map(|s| s.to_vec()).collect::<Vec<_>>(),
                    "layers": layers,
                    "ln_delta": json_f64(gf.ln_delta),
                },
                "bad_coordinates": tf.bad.to_vec(),
                "certificate": {
                    "valid": check.is_valid(),
                    "violation": check.violation(),
                    "total_layer_size": total,
                    "layer_target": json_f64(target),
                    "meets_target": total as f64 >= target,
                },
            });
            Ok((out, if check.is_valid() { 0 } else { 1 }))
        }
        Command::Enumerate {
            n,
            keep_systems,
            shards,
            out,
            distinct_moduli,
            cap,
        } => {
            let opts = CensusOptions {
                cap: *cap,
                keep_systems: *keep_systems,
                distinct_moduli: *distinct_moduli,
            };
            let record = match out {
                Some(dir) => write_census(std::path::Path::new(dir), *n, *shards, &opts)?,
                None if *shards > 1 => shard_and_merge(*n, *shards, &opts)?,
                None => enumerate_minimal_covers(*n, &opts)?,
            };
            Ok((census_json(&record, *shards), 0))
        }
    }
}

fn census_json(record: &CensusRecord, shards: u64) -> Value {
    let by_lcm: serde_json::Map<String, Value> = record
        .by_lcm
        .iter()
        .map(|(m, &c)| (m.to_string(), json!(c)))
        .collect();
    let mut out = json!({
        "n": record.n,
        "total": record.total,
        "by_lcm": by_lcm,
        "contains_z": record.contains_z,
        "shards": shards,
    });
    if let Some(systems) = &record.systems {
        out["systems"] = Value::Array(
            systems
                .iter()
                .map(|sys| {
                    json!({
                        "lcm": sys.lcm.to_string(),
                        "contains_z": sys.contains_z,
                        "progressions": sys.progressions,
                    })
                })
                .collect(),
        );
    }
    out
}
