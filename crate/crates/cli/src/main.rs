use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use occtrack::ablation::{ablate_scenarios, ablate_stream, format_table, AblationRow};
use occtrack::io::{
    read_stream, read_tracked_stream, track_stream, write_frame, write_tracked, CocoDataset, Settings, TrackedFrame,
};
use occtrack::latency::{measure, LatencyConfig};
use occtrack::metrics::evaluate_streams;
use occtrack::sifp::{plan, scale_histogram, SifpPlan};
use occtrack::simulator::{generate, ScenarioConfig};
use occtrack::{object_scale, Error};

/// Occlusion-aware multi-person pose tracking.
#[derive(Parser, Debug)]
#[command(name = "occtrack", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override a config key; repeatable. Applied after --config.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Assign track ids to a detection stream.
    Track {
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        assignment: Option<String>,
        /// Detection stream; `-` reads standard input.
        #[arg(long, short, default_value = "-")]
        input: PathBuf,
        /// Tracked stream; `-` writes standard output.
        #[arg(long, short, default_value = "-")]
        output: PathBuf,
    },
    /// Score a tracked stream against ground truth.
    Eval {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long, default_value = "text", value_parser = ["text", "json"])]
        format: String,
    },
    /// Generate a synthetic detection stream and its ground truth.
    Simulate {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        persons: Option<usize>,
        #[arg(long)]
        frames: Option<usize>,
        /// `random` or `crossing`.
        #[arg(long)]
        layout: Option<String>,
        /// Detection stream; `-` writes standard output.
        #[arg(long, short, default_value = "-")]
        output: PathBuf,
        /// Ground-truth stream.
        #[arg(long)]
        gt_out: Option<PathBuf>,
    },
    /// Plan scale-normalized training chips for COCO-style annotations.
    SifpPlan {
        /// Annotation JSON; `-` reads standard input.
        #[arg(long, short, default_value = "-")]
        input: PathBuf,
        /// Plan only this image.
        #[arg(long)]
        image: Option<u64>,
    },
    /// Measure per-frame tracking latency on a synthetic crowd.
    Bench {
        #[arg(long, default_value_t = 100)]
        detections: usize,
        #[arg(long, default_value_t = 300)]
        frames: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        mode: Option<String>,
    },
    /// Compare iou_only, reid_always and occlusion_aware tracking.
    Ablate {
        /// Detection stream; requires --gt. Without it, seeded crossing
        /// scenarios are generated.
        #[arg(long, requires = "gt")]
        detections: Option<PathBuf>,
        #[arg(long, requires = "detections")]
        gt: Option<PathBuf>,
        /// Number of generated scenarios, seeds `seed..seed+n`.
        #[arg(long, default_value_t = 1)]
        scenarios: u64,
        #[arg(long)]
        seed: Option<u64>,
        /// Also print one table per scenario.
        #[arg(long)]
        per_scenario: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("occtrack: {}", e.to_string().replace('\n', " "));
            ExitCode::from(if e.is_data_error() { 2 } else { 1 })
        }
    }
}

fn is_broken_pipe(e: &Error) -> bool {
    matches!(e, Error::Io(io) if io.kind() == io::ErrorKind::BrokenPipe)
}

fn settings(common: &Common, base: Settings) -> Result<Settings, Error> {
    let mut s = base;
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        s.apply_text(&text)?;
    }
    s.apply_overrides(common.overrides.iter().map(String::as_str))?;
    s.validate()?;
    Ok(s)
}

fn is_stdio(path: &Path) -> bool {
    path.as_os_str() == "-"
}

fn open_input(path: &Path) -> Result<Box<dyn BufRead>, Error> {
    if is_stdio(path) {
        return Ok(Box::new(BufReader::new(io::stdin().lock())));
    }
    let f = File::open(path).map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    Ok(Box::new(BufReader::new(f)))
}

fn open_output(path: &Path) -> Result<Box<dyn Write>, Error> {
    if is_stdio(path) {
        return Ok(Box::new(BufWriter::new(io::stdout().lock())));
    }
    let f = File::create(path).map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    Ok(Box::new(BufWriter::new(f)))
}

fn read_tracked(path: &Path, s: &Settings) -> Result<Vec<TrackedFrame>, Error> {
    read_tracked_stream(open_input(path)?, s.schema).collect()
}

fn run(cli: Cli) -> Result<(), Error> {
    let common = &cli.common;
    match cli.cmd {
        Command::Track {
            mode,
            assignment,
            input,
            output,
        } => {
            let mut s = settings(common, Settings::default())?;
            if let Some(m) = mode {
                s.set("mode", &m)?;
            }
            if let Some(a) = assignment {
                s.set("assignment", &a)?;
            }
            let mut out = open_output(&output)?;
            track_stream(read_stream(open_input(&input)?, s.schema), &s.tracker, |f| {
                write_tracked(&mut out, &f)
            })?;
            out.flush()?;
        }
        Command::Eval { gt, hyp, format } => {
            let s = settings(common, Settings::default())?;
            let report = evaluate_streams(read_tracked(&gt, &s)?, read_tracked(&hyp, &s)?, &s.eval)?;
            let text = if format == "json" {
                report.to_json() + "\n"
            } else {
                report.to_key_value()
            };
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
        Command::Simulate {
            seed,
            persons,
            frames,
            layout,
            output,
            gt_out,
        } => {
            let mut s = settings(common, Settings::default())?;
            if let Some(v) = seed {
                s.scenario.seed = v;
            }
            if let Some(v) = persons {
                s.scenario.n_persons = v;
            }
            if let Some(v) = frames {
                s.scenario.n_frames = v;
            }
            if let Some(v) = layout {
                s.set("layout", &v)?;
            }
            let scenario = generate(&s.scenario)?;
            let mut out = open_output(&output)?;
            for f in &scenario.detections {
                write_frame(&mut out, f)?;
            }
            out.flush()?;
            if let Some(path) = gt_out {
                let mut g = open_output(&path)?;
                for f in &scenario.ground_truth {
                    write_tracked(&mut g, f)?;
                }
                g.flush()?;
            }
        }
        Command::SifpPlan { input, image } => {
            let s = settings(common, Settings::default())?;
            let mut text = String::new();
            open_input(&input)?.read_to_string(&mut text)?;
            let ds = CocoDataset::from_reader(text.as_bytes())?;
            let mut images = ds.images()?;
            if let Some(id) = image {
                images.retain(|i| i.image.id == id);
                if images.is_empty() {
                    return Err(Error::Planning(format!("no image with id {id}")));
                }
            }
            let mut report = String::new();
            let mut scales = Vec::new();
            let mut used = Vec::new();
            for img in &images {
                let p = plan(img.image.width, img.image.height, &img.objects, &s.sifp)
                    .map_err(|e| Error::Planning(format!("image {}: {}", img.image.id, strip_kind(&e))))?;
                scales.extend(img.objects.iter().map(object_scale));
                used.extend(
                    img.objects
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| !p.unused.contains(i))
                        .map(|(_, b)| object_scale(b)),
                );
                report.push_str(&format_plan(img.image.id, &p));
            }
            report.push_str(&format_histograms(&scales, &used));
            let mut out = io::stdout().lock();
            out.write_all(report.as_bytes())?;
            out.flush()?;
        }
        Command::Bench {
            detections,
            frames,
            seed,
            mode,
        } => {
            let mut s = settings(common, Settings::default())?;
            if let Some(m) = mode {
                s.set("mode", &m)?;
            }
            let load = LatencyConfig {
                detections_per_frame: detections,
                frames,
                reid_dim: s.schema.reid_dim,
                seed,
            };
            let report = measure(&load, &s.tracker)?;
            println!("mode = {}", s.tracker.mode);
            println!("detections_per_frame = {detections}");
            println!("{report}");
        }
        Command::Ablate {
            detections,
            gt,
            scenarios,
            seed,
            per_scenario,
        } => {
            let base = Settings {
                scenario: ScenarioConfig::crossing(0),
                ..Settings::default()
            };
            let s = settings(common, base)?;
            let mut out = String::new();
            match (detections, gt) {
                (Some(d), Some(g)) => {
                    let dets = read_stream(open_input(&d)?, s.schema).collect::<Result<Vec<_>, _>>()?;
                    let rows = ablate_stream(&dets, &read_tracked(&g, &s)?, &s.tracker, &s.eval)?;
                    out.push_str(&format_table(&rows));
                }
                _ => {
                    let first = seed.unwrap_or(s.scenario.seed);
                    let configs: Vec<ScenarioConfig> = (0..scenarios)
                        .map(|i| {
                            let seed = first + i;
                            ScenarioConfig {
                                seed,
                                sequence: format!("crossing-{seed}"),
                                ..s.scenario.clone()
                            }
                        })
                        .collect();
                    let summary = ablate_scenarios(&configs, &s.tracker, &s.eval)?;
                    if per_scenario {
                        for (cfg, rows) in configs.iter().zip(&summary.per_scenario) {
                            out.push_str(&format!("# {}\n", cfg.sequence));
                            out.push_str(&format_table(rows));
                            out.push('\n');
                        }
                    }
                    if per_scenario || scenarios > 1 {
                        out.push_str(&format!("# total over {scenarios} scenarios\n"));
                    }
                    out.push_str(&format_table(&summary.totals));
                    out.push_str(&ordering_line(&summary.totals));
                }
            }
            let mut stdout = io::stdout().lock();
            stdout.write_all(out.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn strip_kind(e: &Error) -> String {
    match e {
        Error::Planning(m) => m.clone(),
        other => other.to_string(),
    }
}

fn ordering_line(rows: &[AblationRow]) -> String {
    let ids: Vec<u64> = rows.iter().map(|r| r.report.ids).collect();
    let reduction = match (rows.first(), rows.last()) {
        (Some(first), Some(last)) if first.report.ids > 0 => {
            100.0 * (1.0 - last.report.ids as f64 / first.report.ids as f64)
        }
        _ => 0.0,
    };
    format!(
        "ids reduction vs {}: {:.1}% (ids: {})\n",
        rows.first().map_or("-", |r| r.mode.as_str()),
        reduction,
        ids.iter().map(u64::to_string).collect::<Vec<_>>().join(" / ")
    )
}

fn format_plan(image_id: u64, p: &SifpPlan) -> String {
    let mut s = format!(
        "image {image_id} ({}x{}): {} unused objects\n",
        p.image_width,
        p.image_height,
        p.unused.len()
    );
    s.push_str(&format!(
        "  {:>6} {:>11} {:>6} {:>6} {:>8}  {}\n",
        "omega", "scaled", "valid", "chips", "invalid", "fpn P2..P6"
    ));
    for level in &p.levels {
        let mut per_level = [0usize; 5];
        for &l in &level.fpn_levels {
            per_level[usize::from(l.saturating_sub(2)).min(4)] += 1;
        }
        s.push_str(&format!(
            "  {:>6} {:>11} {:>6} {:>6} {:>8}  {}\n",
            level.omega,
            format!("{}x{}", level.scaled_size.0, level.scaled_size.1),
            level.valid.len(),
            level.chips.len(),
            level.invalid.len(),
            per_level.map(|c| c.to_string()).join(" ")
        ));
        for chip in &level.chips {
            let r = chip.rect;
            s.push_str(&format!(
                "    chip [{}, {}, {}, {}] objects {:?} ignore {:?}\n",
                r.x_min, r.y_min, r.x_max, r.y_max, chip.included, chip.excluded
            ));
        }
    }
    s
}

const SCALE_EDGES: [f64; 9] = [0.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0, 1024.0, f64::INFINITY];

fn format_histograms(all: &[f64], used: &[f64]) -> String {
    let a = scale_histogram(all.iter().copied(), &SCALE_EDGES);
    let u = scale_histogram(used.iter().copied(), &SCALE_EDGES);
    let mut s = String::from("scale distribution\n");
    s.push_str(&format!("  {:<12} {:>8} {:>8}\n", "scale", "objects", "trained"));
    for (i, w) in SCALE_EDGES.windows(2).enumerate() {
        let label = if w[1].is_infinite() {
            format!(">={}", w[0])
        } else {
            format!("[{},{})", w[0], w[1])
        };
        s.push_str(&format!("  {:<12} {:>8} {:>8}\n", label, a[i], u[i]));
    }
    s
}
