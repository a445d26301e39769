use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use emg_rnn::dwt::{db1_filters, decompose};
use emg_rnn::features::feature_names;
use emg_rnn::pipeline::{dataset_features, fit_model};
use emg_rnn::postprocess::{bench_latency, sweep, SWEEP_LENGTHS_MS};
use emg_rnn::signal::{
    load_recordings, load_split, parse_sample_row, read_recording_file, synth_dataset, synth_file_name, synth_manifest,
    write_recording_file, DatasetManifest, Recording, Split, SynthConfig, DEFAULT_SAMPLE_RATE,
};
use emg_rnn::{Arch, ExtractConfig, FeatureParams, InputMode, StackModel, StreamClassifier, TrainConfig};

use crate::config::ConfigFile;
use crate::{
    missing, BenchCmd, Cli, Command, ConfigContext, DwtCmd, ExtractArgs, ExtractCmd, Failure, PredictCmd, SweepCmd,
    SynthArgs, TrainArgs, TrainCmd,
};

type Result<T, E = Failure> = std::result::Result<T, E>;

pub fn run(cli: Cli) -> Result<()> {
    if cli.threads == 0 {
        return Err(anyhow!("--threads must be >= 1")).config_err();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .context("cannot start thread pool")?;
    let cfg = ConfigFile::load(cli.config.as_deref()).config_err()?;
    match cli.command {
        Command::Synth(a) => synth(&cfg, a),
        Command::Extract(a) => extract(&cfg, a),
        Command::Train(a) => train(&cfg, a),
        Command::Sweep(a) => run_sweep(&cfg, a),
        Command::Bench(a) => bench(&cfg, a),
        Command::Predict(a) => predict(&cfg, a),
        Command::Dwt(a) => dwt(&cfg, a),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn extract_config(cfg: &ConfigFile, a: ExtractArgs) -> Result<ExtractConfig> {
    let d = ExtractConfig::default();
    let p = FeatureParams::default();
    let e = ExtractConfig {
        window_len: cfg.get_or(a.window_len, "window_len", d.window_len).config_err()?,
        step: cfg.get_or(a.step, "step", d.step).config_err()?,
        levels: cfg.get_or(a.levels, "levels", d.levels).config_err()?,
        params: FeatureParams {
            myop_threshold: cfg
                .get_or(a.myop_threshold, "myop_threshold", p.myop_threshold)
                .config_err()?,
            wamp_threshold: cfg
                .get_or(a.wamp_threshold, "wamp_threshold", p.wamp_threshold)
                .config_err()?,
            ialv_offset: cfg.get_or(a.ialv_offset, "ialv_offset", p.ialv_offset).config_err()?,
        },
    };
    e.validate().config_err()?;
    Ok(e)
}

fn train_config(cfg: &ConfigFile, a: TrainArgs) -> Result<TrainConfig> {
    let d = TrainConfig::default();
    let t = TrainConfig {
        learning_rate: cfg
            .get_or(a.learning_rate, "learning_rate", d.learning_rate)
            .config_err()?,
        momentum: cfg.get_or(a.momentum, "momentum", d.momentum).config_err()?,
        epochs: cfg.get_or(a.epochs, "epochs", d.epochs).config_err()?,
        batch_size: cfg.get_or(a.batch_size, "batch_size", d.batch_size).config_err()?,
        seed: cfg.get_or(a.seed, "seed", d.seed).config_err()?,
        init_scale: cfg.get_or(a.init_scale, "init_scale", d.init_scale).config_err()?,
        hidden1: cfg.get_or(a.hidden1, "hidden1", d.hidden1).config_err()?,
        hidden2: cfg.get_or(a.hidden2, "hidden2", d.hidden2).config_err()?,
    };
    t.validate().config_err()?;
    Ok(t)
}

fn manifest(cfg: &ConfigFile, flag: Option<PathBuf>, subcommand: &str) -> Result<DatasetManifest> {
    let path = cfg
        .path(flag, "manifest")
        .ok_or_else(|| missing(subcommand, "--manifest"))?;
    if !path.is_file() {
        return Err(anyhow!("manifest {} does not exist", path.display())).config_err();
    }
    DatasetManifest::read(&path).config_err()
}

fn load_model(cfg: &ConfigFile, flag: Option<PathBuf>, subcommand: &str) -> Result<StackModel> {
    let path = cfg.path(flag, "model").ok_or_else(|| missing(subcommand, "--model"))?;
    if !path.is_file() {
        return Err(anyhow!("model {} does not exist", path.display())).config_err();
    }
    Ok(StackModel::load(&path)?)
}

fn synth(cfg: &ConfigFile, a: SynthArgs) -> Result<()> {
    let out = cfg.path(a.out, "out").ok_or_else(|| missing("synth", "--out"))?;
    let d = SynthConfig::default();
    let sc = SynthConfig {
        num_classes: cfg.get_or(a.classes, "classes", d.num_classes).config_err()?,
        channels: cfg.get_or(a.channels, "channels", d.channels).config_err()?,
        trials_per_class: cfg.get_or(a.trials, "trials", d.trials_per_class).config_err()?,
        duration: cfg.get_or(a.duration, "duration", d.duration).config_err()?,
        sample_rate: cfg.get_or(a.sample_rate, "sample_rate", d.sample_rate).config_err()?,
        noise_std: cfg.get_or(a.noise, "noise", d.noise_std).config_err()?,
        seed: cfg.get_or(a.seed, "seed", d.seed).config_err()?,
    };
    let test_trials: usize = cfg.get_or(a.test_trials, "test_trials", 4).config_err()?;
    if test_trials >= sc.trials_per_class {
        return Err(anyhow!(
            "test_trials ({test_trials}) must be smaller than trials ({})",
            sc.trials_per_class
        ))
        .config_err();
    }
    let recordings = synth_dataset(&sc).config_err()?;
    fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
    for r in &recordings {
        write_recording_file(&out.join(synth_file_name(r)), r)?;
    }
    let m = synth_manifest(&sc, &recordings, test_trials);
    m.write(&out.join("manifest.txt"))?;
    println!(
        "wrote {} recordings ({} classes, {} channels) and {}",
        recordings.len(),
        sc.num_classes,
        sc.channels,
        out.join("manifest.txt").display()
    );
    Ok(())
}

fn extract(cfg: &ConfigFile, a: ExtractCmd) -> Result<()> {
    let m = manifest(cfg, a.manifest, "extract")?;
    let out_dir = cfg
        .path(a.out_dir, "out_dir")
        .ok_or_else(|| missing("extract", "--out-dir"))?;
    let e = extract_config(cfg, a.extract)?;
    let (entries, recordings): (Vec<_>, Vec<Recording>) = match a.split.as_str() {
        "all" => (m.entries.iter().collect(), load_recordings(&m)?),
        s => {
            let split: Split = s.parse().map_err(anyhow::Error::msg).config_err()?;
            (
                m.entries.iter().filter(|x| x.split == split).collect(),
                load_split(&m, split)?,
            )
        }
    };
    let features = dataset_features(&recordings, &e)?;
    let header = {
        let mut h = String::from("label,start_index");
        for n in feature_names(m.channels, e.levels) {
            h.push(',');
            h.push_str(&n);
        }
        h
    };
    fs::create_dir_all(&out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    for (entry, feats) in entries.iter().zip(&features) {
        let mut csv = header.clone();
        csv.push('\n');
        for f in feats {
            write!(csv, "{},{}", f.label, f.start_index).unwrap();
            for v in &f.values {
                write!(csv, ",{v}").unwrap();
            }
            csv.push('\n');
        }
        let stem = entry.path.file_stem().and_then(|s| s.to_str()).unwrap_or("recording");
        write_file(&out_dir.join(format!("{stem}.csv")), &csv)?;
    }
    println!(
        "wrote features of {} recordings to {}",
        entries.len(),
        out_dir.display()
    );
    Ok(())
}

fn train(cfg: &ConfigFile, a: TrainCmd) -> Result<()> {
    let m = manifest(cfg, a.manifest, "train")?;
    let arch: Arch = cfg
        .get(a.arch, "arch")
        .config_err()?
        .ok_or_else(|| missing("train", "--arch"))?
        .parse()
        .map_err(anyhow::Error::msg)
        .config_err()?;
    let mode: InputMode = cfg
        .get(a.input_mode, "input_mode")
        .config_err()?
        .ok_or_else(|| missing("train", "--input"))?
        .parse()
        .map_err(anyhow::Error::msg)
        .config_err()?;
    let out = cfg.path(a.out, "model").ok_or_else(|| missing("train", "--out"))?;
    let e = extract_config(cfg, a.extract)?;
    let t = train_config(cfg, a.train)?;

    let train_set = load_split(&m, Split::Train)?;
    let outcome = fit_model(&train_set, m.num_classes, arch, mode, &e, &t)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    outcome.model.save(&out)?;

    let loss_out = cfg.path(a.loss_out, "loss_out").unwrap_or_else(|| {
        let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
        out.with_file_name(format!("{stem}_loss.csv"))
    });
    let mut csv = String::from("epoch,loss\n");
    for (i, l) in outcome.loss_curve.iter().enumerate() {
        writeln!(csv, "{},{l}", i + 1).unwrap();
    }
    write_file(&loss_out, &csv)?;
    println!(
        "trained {} on {} recordings: final loss {:.6}; model {}, loss curve {}",
        outcome.model.name(),
        train_set.len(),
        outcome.loss_curve.last().copied().unwrap_or(f64::NAN),
        out.display(),
        loss_out.display()
    );
    Ok(())
}

fn run_sweep(cfg: &ConfigFile, a: SweepCmd) -> Result<()> {
    let m = manifest(cfg, a.manifest, "sweep")?;
    let mut paths = a.models;
    if paths.is_empty() {
        paths.extend(cfg.path(None, "model"));
    }
    if paths.is_empty() {
        return Err(missing("sweep", "--model"));
    }
    let models: Vec<StackModel> = paths
        .into_iter()
        .map(|p| load_model(cfg, Some(p), "sweep"))
        .collect::<Result<_>>()?;
    let lengths = cfg
        .list(a.lengths, "lengths")
        .config_err()?
        .unwrap_or_else(|| SWEEP_LENGTHS_MS.to_vec());
    let per_class_length = cfg
        .get_or(
            a.per_class_length,
            "per_class_length",
            *lengths.last().unwrap_or(&600.0),
        )
        .config_err()?;
    for model in &models {
        if model.num_classes() != m.num_classes {
            return Err(anyhow!(
                "model {} has {} classes, manifest has {}",
                model.name(),
                model.num_classes(),
                m.num_classes
            ))
            .config_err();
        }
    }

    let test_set = load_split(&m, Split::Test)?;
    let refs: Vec<&StackModel> = models.iter().collect();
    let report = sweep(&refs, &test_set, &lengths, Some(per_class_length))?;
    print!("{}", report.to_table());

    if let Some(dir) = cfg.path(a.out_dir, "out_dir") {
        write_file(&dir.join("sweep.csv"), &report.to_csv())?;
        write_file(&dir.join("sweep.json"), &report.to_json())?;
        for (i, pc) in report.per_class.iter().enumerate() {
            write_file(&dir.join(format!("per_class_{i}.csv")), &pc.to_csv())?;
            write_file(&dir.join(format!("confusion_{i}.csv")), &pc.confusion_csv())?;
        }
    }
    Ok(())
}

fn bench(cfg: &ConfigFile, a: BenchCmd) -> Result<()> {
    let model = load_model(cfg, a.model, "bench")?;
    let sample_rate = cfg
        .get_or(a.sample_rate, "sample_rate", DEFAULT_SAMPLE_RATE)
        .config_err()?;
    let length_ms = cfg.get_or(a.length_ms, "length_ms", 600.0).config_err()?;
    let iterations = cfg.get_or(a.iterations, "iterations", 200).config_err()?;
    let channels = model_channels(&model)?;
    let recording = match a.input {
        Some(p) => Recording::new(read_recording_file(&p, Some(channels))?, sample_rate, 0, "bench", "0")?,
        None => {
            let sc = SynthConfig {
                num_classes: 1,
                channels,
                trials_per_class: 1,
                duration: length_ms / 1000.0,
                sample_rate,
                ..Default::default()
            };
            synth_dataset(&sc)?.remove(0)
        }
    };
    let n = recording.samples_for_ms(length_ms);
    let recording = recording.prefix(n.min(recording.len()))?;
    // timings are taken on the calling thread, never on the pool
    let report = bench_latency(&model, &recording, iterations)?;
    println!(
        "feature extraction per window: mean {:.4} ms, p95 {:.4} ms ({} samples)",
        report.feature_extraction.mean_ms, report.feature_extraction.p95_ms, report.feature_extraction.count
    );
    println!(
        "stack forward + vote per decision: mean {:.4} ms, p95 {:.4} ms ({} samples)",
        report.classification.mean_ms, report.classification.p95_ms, report.classification.count
    );
    if let Some(dir) = cfg.path(a.out_dir, "out_dir") {
        write_file(&dir.join("latency.json"), &report.to_json())?;
        write_file(&dir.join("latency.csv"), &report.to_csv())?;
    }
    Ok(())
}

fn model_channels(model: &StackModel) -> Result<usize> {
    let per_channel = emg_rnn::features::feature_len(1, model.extract.levels);
    let input = model.dims().input;
    if !input.is_multiple_of(per_channel) {
        return Err(anyhow!("model input width {input} is not a whole number of channels").into());
    }
    Ok(input / per_channel)
}

fn predict(cfg: &ConfigFile, a: PredictCmd) -> Result<()> {
    let model = load_model(cfg, a.model, "predict")?;
    let sample_rate = cfg
        .get_or(a.sample_rate, "sample_rate", DEFAULT_SAMPLE_RATE)
        .config_err()?;
    let length_ms = cfg.get_or(a.length_ms, "length_ms", 600.0).config_err()?;
    let channels = model_channels(&model)?;
    let mut stream = StreamClassifier::new(&model, channels, sample_rate, length_ms).config_err()?;

    let (reader, source): (Box<dyn BufRead>, String) = if a.input == "-" {
        (Box::new(io::stdin().lock()), "<stdin>".into())
    } else {
        let f = fs::File::open(&a.input).with_context(|| format!("cannot open {}", a.input))?;
        (Box::new(BufReader::new(f)), a.input.clone())
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut offset = 0usize;
    for (i, line) in reader.lines().enumerate() {
        let line = line.with_context(|| format!("{source}: read failed after sample {offset}"))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = parse_sample_row(&line).map_err(|m| anyhow!("{source}:{}: sample {offset}: {m}", i + 1))?;
        if row.len() != channels {
            return Err(anyhow!(
                "{source}:{}: sample {offset}: expected {channels} columns, found {}",
                i + 1,
                row.len()
            )
            .into());
        }
        let before = stream.decisions().len();
        let result = stream
            .push(&row)
            .map_err(|e| anyhow!("{source}:{}: sample {offset}: {e}", i + 1))?;
        offset += 1;
        if a.verbose {
            let decisions = result.as_ref().map_or(stream.decisions(), |r| r.decisions.as_slice());
            for d in decisions.iter().skip(before) {
                writeln!(out, "# window {} class={}", d.window_index, d.predicted).context("write failed")?;
            }
        }
        if let Some(r) = result {
            writeln!(
                out,
                "segment={} start_sample={} class={} decisions={}",
                r.segment_index,
                r.start_sample,
                r.predicted,
                r.decisions.len()
            )
            .context("write failed")?;
            out.flush().context("write failed")?;
        }
    }
    if stream.pending_samples() > 0 {
        eprintln!(
            "note: {} trailing samples did not complete a {length_ms} ms segment",
            stream.pending_samples()
        );
    }
    Ok(())
}

fn dwt(cfg: &ConfigFile, a: DwtCmd) -> Result<()> {
    let levels = cfg
        .get_or(a.levels, "levels", emg_rnn::dwt::DEFAULT_LEVELS)
        .config_err()?;
    let samples = read_recording_file(&a.input, None)?;
    let total = samples[0].len();
    let len = a.len.unwrap_or(total.saturating_sub(a.start));
    if a.start + len > total || len == 0 {
        return Err(anyhow!(
            "span {}..{} is outside the recording ({total} samples)",
            a.start,
            a.start + len
        ))
        .config_err();
    }
    let filters = db1_filters();
    let mut csv = String::from("channel,layer,index,value\n");
    for (ch, x) in samples.iter().enumerate() {
        let d = decompose(&x[a.start..a.start + len], levels, &filters)?;
        let names = (1..=levels).map(|l| format!("cD{l}")).chain([format!("cA{levels}")]);
        for (name, layer) in names.zip(d.layers()) {
            for (i, v) in layer.iter().enumerate() {
                writeln!(csv, "{ch},{name},{i},{v}").unwrap();
            }
        }
    }
    match a.out {
        Some(p) => write_file(&p, &csv),
        None => {
            io::stdout().write_all(csv.as_bytes()).context("write failed")?;
            Ok(())
        }
    }
}
