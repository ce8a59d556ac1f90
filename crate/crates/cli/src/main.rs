use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bondtomo::bipartition::{enumerate_representatives, geometry_degeneracy};
use bondtomo::experiment::{
    entropy_csv_name, haar_references, read_entropy_csv, run_protocol, run_spectral_diagnostics, run_tomography,
    write_fits, write_haar, write_run, write_spectral, ExperimentConfig, Protocol,
};
use clap::{Args, Parser, Subcommand};

// glibc malloc fragments badly when large eigenvector buffers interleave with
// small long-lived results across rayon workers
#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

#[derive(Parser)]
#[command(name = "bondtomo", version, about = "Multi-bipartition entanglement tomography of spin chains")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of samples, overriding the config.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Output directory (or file for `bipartitions`), overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Protocol when no config file is given.
    #[arg(long, global = true)]
    protocol: Option<Protocol>,
    /// Chain length when no config file is given.
    #[arg(long, short = 'L', global = true)]
    length: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Count representatives and distinct geometries per subsystem size.
    Bipartitions,
    /// Run an ensemble and write entropy, mutual-information and HCEE files.
    Simulate,
    /// Fit bond tensions to the entropy files written by `simulate`.
    Tomography,
    /// Level-spacing-ratio statistics per disorder realization.
    Spectral,
    /// Sector-Haar and Page reference entropies.
    Haar {
        /// Subsystem sizes; defaults to 1..=L/2.
        #[arg(long, value_delimiter = ',')]
        n0: Vec<usize>,
    },
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match (&c.config, c.protocol) {
        (Some(path), _) => ExperimentConfig::from_file(path).with_context(|| format!("reading {}", path.display()))?,
        (None, Some(p)) => {
            let mut cfg = ExperimentConfig::new(p, c.length.unwrap_or(12));
            cfg.n0_list = vec![cfg.len / 2];
            cfg
        }
        (None, None) => bail!("either --config or --protocol is required"),
    };
    if c.config.is_some() {
        if let Some(l) = c.length {
            if l != cfg.len {
                bail!("--length {l} conflicts with L = {} in the config", cfg.len);
            }
        }
    }
    if let Some(s) = c.seed {
        cfg.master_seed = s;
    }
    if let Some(n) = c.samples {
        cfg.n_samples = n;
    }
    if let Some(o) = &c.out {
        cfg.out_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn bipartitions(c: &Common) -> Result<()> {
    let lengths = match c.length {
        Some(l) => vec![l],
        None => vec![12, 16],
    };
    let mut table = String::from("L,n0,N,M,max_degeneracy\n");
    for len in lengths {
        for n0 in 1..=len / 2 {
            let set = enumerate_representatives(len, n0)?;
            table.push_str(&format!(
                "{len},{n0},{},{},{}\n",
                set.count(),
                set.unique_geometries(),
                geometry_degeneracy(&set)
            ));
        }
    }
    match &c.out {
        Some(path) => std::fs::write(path, &table).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{table}"),
    }
    Ok(())
}

fn simulate(cfg: &ExperimentConfig) -> Result<()> {
    let out = run_protocol(cfg)?;
    let files = write_run(&cfg.out_dir, &out)?;
    let a = &out.audit;
    eprintln!(
        "{}: {} samples in {:.1} s; norm drift {:.1e}, energy drift {}, sector leakage {}",
        cfg.protocol,
        cfg.n_samples,
        out.elapsed_seconds,
        a.max_norm_drift,
        a.max_energy_drift_rel.map_or("n/a".into(), |e| format!("{e:.1e}")),
        a.max_sector_leakage.map_or("n/a".into(), |s| format!("{s:.1e}")),
    );
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}

fn tomography(cfg: &ExperimentConfig) -> Result<()> {
    let mut records = Vec::new();
    for &n0 in &cfg.n0_list {
        let path = cfg.out_dir.join(entropy_csv_name(cfg.protocol, n0));
        let (len, recs) = read_entropy_csv(&path).with_context(|| format!("reading {}", path.display()))?;
        if len != cfg.len {
            bail!("{} holds L = {len}, config says L = {}", path.display(), cfg.len);
        }
        records.extend(recs);
    }
    let fits = run_tomography(cfg.len, cfg.protocol, &records)?;
    let path = cfg.out_dir.join(format!("fits_{}.json", cfg.protocol));
    write_fits(&path, &fits)?;
    println!("n0,time,S0,R2,hierarchy,rank_deficient,omega");
    for f in &fits {
        let omega: Vec<String> = f.fit.omega.iter().map(|w| format!("{w:.6}")).collect();
        println!(
            "{},{},{:.6},{:.6},{},{},{}",
            f.n0,
            f.time,
            f.fit.s0,
            f.fit.r2,
            f.fit.hierarchy().map_or("nan".into(), |h| format!("{h:.3}")),
            f.fit.rank_deficient,
            omega.join(" ")
        );
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn spectral(cfg: &ExperimentConfig) -> Result<()> {
    let out = run_spectral_diagnostics(cfg)?;
    let files = write_spectral(&cfg.out_dir, &out)?;
    let r = out.references;
    println!(
        "{} L={}: mean r = {:.4} +- {:.4} over {} realizations (GOE {:.4}, COE {:.3}, Poisson {:.4})",
        cfg.protocol,
        cfg.len,
        out.mean_r.mean,
        out.mean_r.stderr,
        out.per_realization.len(),
        r.goe,
        r.coe,
        r.poisson
    );
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn haar(c: &Common, n0: &[usize]) -> Result<()> {
    let len = match (&c.config, c.length) {
        (_, Some(l)) => l,
        (Some(path), None) => ExperimentConfig::from_file(path)?.len,
        (None, None) => 12,
    };
    let n0: Vec<usize> = if n0.is_empty() { (1..=len / 2).collect() } else { n0.to_vec() };
    let samples = c.samples.unwrap_or(2000);
    let refs = haar_references(len, &n0, samples, c.seed.unwrap_or(1))?;
    let dir = c.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join(format!("haar_L{len}.csv"));
    write_haar(&path, &refs)?;
    println!("L,n0,sector_mean,sector_stderr,page");
    for r in &refs {
        println!("{},{},{:.6},{:.6},{:.6}", r.len, r.n0, r.sector_mean, r.sector_stderr, r.page);
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.common.threads {
        if n == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let c = &cli.common;
    match &cli.command {
        Command::Bipartitions => bipartitions(c),
        Command::Simulate => simulate(&load_config(c)?),
        Command::Tomography => tomography(&load_config(c)?),
        Command::Spectral => spectral(&load_config(c)?),
        Command::Haar { n0 } => haar(c, n0),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
