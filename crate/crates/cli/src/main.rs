mod args;

use std::io::Write;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};
use surdcnn::dataset::{build_dataset, degrade_lowres, DatasetConfig};
use surdcnn::imaging::{load_ppm, save_ppm};
use surdcnn::infer::{eval, infer_image, pair_directories};
use surdcnn::model::{Network, SurdcnnConfig};
use surdcnn::noise::{NoiseRanges, NoiseSpec};
use surdcnn::train::{train, TrainConfig};
use surdcnn::weights::{describe, load_weights};
use surdcnn::{Mode, SeededRng};

use args::{
    Cli, Command, EvalArgs, InferArgs, InspectArgs, ModelArgs, NoiseArgs, PrepareArgs, TrainArgs,
};

type CliResult = Result<(), Box<dyn std::error::Error>>;

fn main() -> ExitCode {
    let argv = match args::expand_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cmd = Cli::command().mut_subcommands(|s| s.args_override_self(true));
    let cli = match cmd
        .try_get_matches_from(argv)
        .and_then(|m| Cli::from_arg_matches(&m))
    {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let result = match cli.command {
        Command::Prepare(a) => prepare(a),
        Command::Train(a) => run_train(a),
        Command::Infer(a) => infer(a),
        Command::Eval(a) => run_eval(a),
        Command::Inspect(a) => inspect(a),
        Command::Noise(a) => noise(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn model_config(m: &ModelArgs) -> SurdcnnConfig {
    if (m.depth, m.width) == (20, 64) {
        SurdcnnConfig::default()
    } else {
        SurdcnnConfig::scaled(m.depth, m.width)
    }
}

fn prepare(a: PrepareArgs) -> CliResult {
    let mut cfg = DatasetConfig::new(&a.images, &a.out, a.common.seed);
    if let Some(m) = a.manifest {
        cfg.manifest_out = m;
    }
    cfg.patches_per_image = a.patches_per_image;
    cfg.patch_size = a.patch_size;
    cfg.train_fraction = a.train_fraction;
    let mut ranges = if a.literal_poisson {
        NoiseRanges::literal_poisson_scale()
    } else {
        NoiseRanges::default()
    };
    ranges.var_max = a.gaussian_var_max.unwrap_or(ranges.var_max);
    ranges.s_min = a.poisson_scale_min.unwrap_or(ranges.s_min);
    ranges.s_max = a.poisson_scale_max.unwrap_or(ranges.s_max);
    cfg.ranges = ranges;
    let m = build_dataset(&cfg)?;
    println!(
        "wrote {} ({} train, {} val from {} images) and {}",
        cfg.data_out.display(),
        m.train,
        m.val,
        m.sources.len(),
        cfg.manifest_out.display()
    );
    Ok(())
}

fn run_train(a: TrainArgs) -> CliResult {
    let mut cfg = TrainConfig::new(&a.data, &a.checkpoint, a.common.seed);
    if a.paper_literal {
        cfg = cfg.paper_literal();
    }
    if let Some(m) = a.metrics {
        cfg.metrics = m;
    }
    cfg.weights_out = a.weights_out;
    cfg.learning_rate = a.lr.unwrap_or(cfg.learning_rate);
    if a.no_clip {
        cfg.clip_norm = None;
    } else if let Some(c) = a.clip {
        cfg.clip_norm = Some(c);
    }
    cfg.epochs = a.epochs.unwrap_or(cfg.epochs);
    cfg.batch_size = a.batch_size;
    cfg.precision = a.precision;
    cfg.init = a.init;
    cfg.model = model_config(&a.model);
    cfg.resume = a.resume;
    println!("epoch,train_loss,val_loss,val_psnr_gain");
    train(&cfg, |row| {
        println!("{}", row.csv_line());
        let _ = std::io::stdout().flush();
    })?;
    Ok(())
}

fn infer(a: InferArgs) -> CliResult {
    let net = load_weights(&a.weights)?;
    let lowres = load_ppm(&a.input)?;
    let out = infer_image(&net, &lowres)?;
    save_ppm(&out, &a.output)?;
    println!(
        "wrote {} ({}x{})",
        a.output.display(),
        out.width(),
        out.height()
    );
    Ok(())
}

fn run_eval(a: EvalArgs) -> CliResult {
    let net = load_weights(&a.weights)?;
    let report = eval(&net, &pair_directories(&a.clean, &a.degraded)?);
    print!("{}", report.to_table());
    if let Some(path) = &a.csv {
        std::fs::write(path, report.to_csv()).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    if report.mean_gain().is_none() {
        return Err("no image pair could be evaluated".into());
    }
    Ok(())
}

fn inspect(a: InspectArgs) -> CliResult {
    let net = match &a.weights {
        Some(path) => load_weights(path)?,
        None => {
            let mut net = Network::build(
                model_config(&a.model),
                a.init,
                &mut SeededRng::new(a.common.seed),
            )?;
            net.set_mode(Mode::Infer);
            net
        }
    };
    print!("{}", describe(&net));
    Ok(())
}

fn noise(a: NoiseArgs) -> CliResult {
    let img = load_ppm(&a.input)?;
    let spec = NoiseSpec {
        gaussian_var: a.gaussian_var,
        poisson_scale: a.poisson_scale,
        seed: a.common.seed,
    };
    let out = if a.downscale {
        degrade_lowres(&img, &spec)?
    } else {
        spec.apply(&img)?
    };
    save_ppm(&out, &a.output)?;
    println!(
        "wrote {} ({}x{})",
        a.output.display(),
        out.width(),
        out.height()
    );
    Ok(())
}
