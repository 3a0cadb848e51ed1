use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use shm_assess::study::{AssessTarget, Study, StudyConfig, TaskConvergence};
use shm_assess::Result;

#[derive(Parser)]
#[command(
    name = "shm-assess",
    version,
    about = "Bayesian model updating and utility-based model assessment"
)]
struct Cli {
    /// Study configuration (TOML); built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic three-phase strain record.
    Generate,
    /// Fit strain and demand surrogates of every surrogate candidate.
    FitSurrogate,
    /// System identification of E on the intact phase.
    Sysid,
    /// Thickness-loss diagnosis on the final phase.
    Diagnose,
    /// Deterioration prognosis with both laws plus predictive bands.
    Prognose,
    /// Expected utilities of the stored posteriors.
    Assess {
        /// sysid, diagnosis or prognosis
        #[arg(long)]
        task: AssessTarget,
    },
    /// Gather all artifacts into report.json.
    Report,
    /// Every step above in order.
    Run,
}

fn print_convergence(task: &str, conv: &[shm_assess::study::CandidateConvergence]) {
    for c in conv {
        println!(
            "{task:<20} {:<4} max R-hat {:.4} {}",
            c.id,
            c.report.max_rhat(),
            if c.report.pass { "ok" } else { "FAILED" }
        );
    }
}

fn print_tasks(tasks: &[TaskConvergence]) {
    for t in tasks {
        print_convergence(&t.task, &t.candidates);
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => StudyConfig::load(p)?,
        None => StudyConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.out_dir = o;
    }
    let study = Study::new(cfg)?;
    match cli.command {
        Command::Generate => {
            let s = study.generate()?;
            println!(
                "wrote {} observations to {}",
                s.len(),
                study.out_dir().join("data.csv").display()
            );
        }
        Command::FitSurrogate => {
            for p in study.fit_surrogates()? {
                println!("{:<4} strain R2 {:.5}  demand R2 {:.5}", p.id, p.strain.r2, p.demand.r2);
            }
        }
        Command::Sysid => print_convergence("sysid", &study.sysid()?),
        Command::Diagnose => print_convergence("diagnosis", &study.diagnose()?),
        Command::Prognose => print_tasks(&study.prognose()?),
        Command::Assess { task } => {
            for r in study.assess(task)? {
                println!("{} (oracle {})", r.task, r.oracle);
                for c in &r.candidates {
                    println!(
                        "  {:<4} U_nmse {:.4}  U_lik {:.4}  U_pf {:.4}  U {:.4}",
                        c.id, c.u_nmse, c.u_lik, c.u_pf, c.u_unified
                    );
                }
            }
        }
        Command::Report => {
            let r = study.report()?;
            println!(
                "{} utility reports -> {}",
                r.utilities.len(),
                study.out_dir().join("report.json").display()
            );
        }
        Command::Run => {
            let r = study.run_all()?;
            print_tasks(&r.convergence);
            for u in &r.utilities {
                for c in &u.candidates {
                    println!("{:<20} {:<4} U {:.4}", u.task, c.id, c.u_unified);
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
