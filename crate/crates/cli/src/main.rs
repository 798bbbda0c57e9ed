use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use dropletlab::imaging::{measure_png, MeasureParams};
use dropletlab::lab::{render_droplet, RenderParams};
use dropletlab::optimizer::CampaignRecord;
use dropletlab::orchestrator::{
    campaign_report, compare_bound_widths, compare_campaign_modes, compare_weight_ratios, run_sweep,
    run_virtual_campaign, write_compare_csv, write_report_csv, write_sweep_csv, write_variant_csv, CampaignConfig,
    CompareOptions, LabLink, RunOptions, SweepConfig, VariantSummary, CONFIG_FILE, RECORD_FILE,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "dropletlab", version, about = "Contact-angle imaging and closed-loop formulation campaigns")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Measure the contact angle in a backlit drop photograph.
    Measure {
        image: PathBuf,
        /// Print the full result as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Render a synthetic drop photograph.
    Render {
        #[arg(long)]
        theta: f64,
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
        /// Pixel noise SD, in gray levels.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0.0)]
        tilt: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Measure every point of a grid on the virtual lab.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run or compare optimization campaigns.
    Campaign {
        #[command(subcommand)]
        cmd: CampaignCmd,
    },
    /// Summarize a campaign output directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LabArg {
    Virtual,
    Broker,
}

#[derive(Subcommand)]
enum CampaignCmd {
    /// Closed-loop campaign on the virtual lab.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long, value_enum, default_value_t = LabArg::Virtual)]
        lab: LabArg,
        #[arg(long)]
        out: PathBuf,
        /// Continue from the event log in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Two-objective campaign against its contact-angle-only reduction across seeds.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        first_seed: u64,
        #[arg(long)]
        budget: Option<usize>,
        /// Weight vectors to compare instead, e.g. "1:1,1:3,3:1".
        #[arg(long)]
        weight_ratios: Option<String>,
        /// Contact-angle bound half-widths to compare instead, e.g. "50,10,0.805".
        #[arg(long)]
        bound_widths: Option<String>,
        /// CSV output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_list(s: &str, sep: char) -> Result<Vec<f64>> {
    s.split(sep).map(|x| x.trim().parse::<f64>().with_context(|| format!("bad number `{x}`"))).collect()
}

fn measure(image: &Path, json: bool) -> Result<()> {
    let r = measure_png(image, &MeasureParams::default()).with_context(|| format!("measuring {}", image.display()))?;
    if json {
        println!("{}", serde_json::to_string_pretty(&r)?);
    } else {
        println!("angle_deg {:.2}", r.angle_deg);
        println!("rmse_px {:.3}", r.rmse_px);
        println!("bond_number {:.3}", r.bond_number);
        for f in &r.flags {
            println!("flag {}", serde_json::to_string(f)?.trim_matches('"'));
        }
    }
    Ok(())
}

fn render(theta: f64, beta: f64, noise: f64, tilt: f64, seed: u64, out: &Path) -> Result<()> {
    let mut rp = RenderParams::framed(theta, beta)?;
    rp.noise_sigma = noise;
    rp.tilt_deg = tilt;
    let img = render_droplet(theta, &rp, &mut ChaCha8Rng::seed_from_u64(seed))?;
    img.save_png(out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn print_variants(rows: &[VariantSummary]) {
    println!("{:<12} {:>5} {:>6} {:>8}", "variant", "runs", "found", "median");
    for r in rows {
        println!("{:<12} {:>5} {:>6} {:>8}", r.label, r.runs, r.found, r.median_first_optimal);
    }
}

fn campaign(cmd: CampaignCmd) -> Result<()> {
    match cmd {
        CampaignCmd::Run { config, seed, budget, lab, out, resume } => {
            let cfg = CampaignConfig::from_json_file(&config)?;
            let seed = seed.unwrap_or(cfg.seed);
            let link = match lab {
                LabArg::Virtual => LabLink::Virtual,
                LabArg::Broker => LabLink::Broker,
            };
            let opts = RunOptions { budget, out_dir: Some(out.clone()), resume, ..RunOptions::default() };
            let o = run_virtual_campaign(&cfg, seed, link, &opts)?;
            let best = o.record.history.iter().max_by(|a, b| a.desirability.total_cmp(&b.desirability));
            println!(
                "{} experiments, {} faults, {} substrate changes",
                o.record.history.len(),
                o.faults(),
                o.substrate_changes()
            );
            if let Some(b) = best {
                println!("best D {:.4} at iteration {} ({:.2} deg)", b.desirability, b.iteration, b.mean_angle());
            }
            println!("wrote {}", out.display());
        }
        CampaignCmd::Compare { config, seeds, first_seed, budget, weight_ratios, bound_widths, out } => {
            let cfg = CampaignConfig::from_json_file(&config)?;
            let seeds: Vec<u64> = (first_seed..first_seed + seeds).collect();
            let opts = CompareOptions { budget, criteria: None };
            if weight_ratios.is_some() && bound_widths.is_some() {
                bail!("choose one of --weight-ratios and --bound-widths");
            }
            if let Some(w) = weight_ratios {
                let ratios = w.split(',').map(|r| parse_list(r, ':')).collect::<Result<Vec<_>>>()?;
                let rows = compare_weight_ratios(&cfg, &ratios, &seeds, &opts)?;
                print_variants(&rows);
                if let Some(p) = out {
                    write_variant_csv(&p, &rows)?;
                }
            } else if let Some(b) = bound_widths {
                let rows = compare_bound_widths(&cfg, &parse_list(&b, ',')?, &seeds, &opts)?;
                print_variants(&rows);
                if let Some(p) = out {
                    write_variant_csv(&p, &rows)?;
                }
            } else {
                let r = compare_campaign_modes(&cfg, &seeds, &opts)?;
                let cell = |v: Option<usize>| v.map_or("-".to_string(), |i| i.to_string());
                println!("{:>6} {:>6} {:>6}", "seed", "multi", "single");
                for row in &r.rows {
                    println!("{:>6} {:>6} {:>6}", row.seed, cell(row.multi), cell(row.single));
                }
                println!(
                    "median first optimal: multi {} single {} (budget {})",
                    r.median_multi, r.median_single, r.budget
                );
                if let Some(p) = out {
                    write_compare_csv(&p, &r)?;
                }
            }
        }
    }
    Ok(())
}

fn report(input: &Path, out: &Path) -> Result<()> {
    let text =
        std::fs::read_to_string(input.join(RECORD_FILE)).with_context(|| format!("reading {}", input.display()))?;
    let record: CampaignRecord = serde_json::from_str(&text)?;
    let config = match std::fs::read_to_string(input.join(CONFIG_FILE)) {
        Ok(t) => Some(CampaignConfig::from_json_str(&t)?),
        Err(_) => None,
    };
    let rows = campaign_report(&record, config.as_ref());
    write_report_csv(out, &record, &rows)?;
    let optimal = rows.iter().filter(|r| r.optimal == Some(true)).count();
    println!("{} iterations, {} optimal", rows.len(), optimal);
    println!("wrote {}", out.display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Measure { image, json } => measure(&image, json),
        Cmd::Render { theta, beta, noise, tilt, seed, out } => render(theta, beta, noise, tilt, seed, &out),
        Cmd::Sweep { config, out } => {
            let cfg = SweepConfig::from_json_file(&config)?;
            let rows = run_sweep(&cfg)?;
            write_sweep_csv(&out, &cfg, &rows)?;
            println!("{} formulations, wrote {}", rows.len(), out.display());
            Ok(())
        }
        Cmd::Campaign { cmd } => campaign(cmd),
        Cmd::Report { input, out } => report(&input, &out),
    }
}
