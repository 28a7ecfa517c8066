use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use serde::{Deserialize, Serialize};

use hazard_lfd::analysis::{significance_report, PopulationSample, SignificanceReport};
use hazard_lfd::config::Defaults;
use hazard_lfd::constraints::{generate_multi, EgoState};
use hazard_lfd::demogen::{generate_population, DriverProfile, Factor, ScenarioCalibration};
use hazard_lfd::geometry::{
    point_from_hazard_centric, point_to_hazard_centric, to_hazard_centric, FrameKind,
    HazardDescriptor, RoadSpec, ScenarioLabel, Traffic, Trajectory,
};
use hazard_lfd::io::{
    envelope_from_json, load_trajectory, model_from_json, read_text, to_json, write_trajectory_csv,
};
use hazard_lfd::keyframe::{estimate_d_thresh, train_scenario_model, ScenarioModel};
use hazard_lfd::plot::{envelope_svg, model_svg};

use crate::output::{sha256_hex, Sink};
use crate::{Cli, CliError, Command};

pub const MANIFEST: &str = "manifest.json";
pub const RESOLVED_CONFIG: &str = "resolved_config.toml";
const MANIFEST_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestDemo {
    pub file: String,
    pub seed: u64,
    pub sha256: String,
    pub onset_d_thresh: f64,
    pub profile: DriverProfile,
}

/// Description of a simulated population directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub label: String,
    pub master_seed: u64,
    pub style_mix: f64,
    pub calibration: ScenarioCalibration,
    pub road: RoadSpec,
    pub road_heading: f64,
    pub hazard: HazardDescriptor,
    pub demos: Vec<ManifestDemo>,
}

pub fn run(cli: &Cli) -> Result<()> {
    let defaults = load_defaults(cli)?;
    let sink = Sink::new(cli.out.clone(), cli.stdout)?;
    match &cli.command {
        Command::Train { demo_dir, label, hazard } => {
            train(&defaults, &sink, demo_dir, label.as_deref(), hazard.as_deref())
        }
        Command::Generate { models, hazards, ego, traffic } => {
            generate(&defaults, &sink, models, hazards, ego, traffic.as_deref())
        }
        Command::Simulate { label, n, style_mix, factor } => {
            simulate(&defaults, &sink, cli.seed, label, *n, *style_mix, factor.as_deref())
        }
        Command::Analyze { dirs, pairs } => analyze(&defaults, &sink, dirs, pairs),
        Command::Plot { input } => plot(&defaults, &sink, input),
    }
}

fn load_defaults(cli: &Cli) -> Result<Defaults> {
    let overrides = match &cli.config {
        Some(p) => Some(read_text(p)?),
        None => None,
    };
    let mut d = Defaults::from_overrides(overrides.as_deref())?;
    if let Some(p) = &cli.calibration {
        d = d.with_calibration(&read_text(p)?).with_context(|| format!("calibration {}", p.display()))?;
    }
    Ok(d)
}

/// Writes the defaults in force plus the command's own parameters.
fn echo_config(sink: &Sink, d: &Defaults, run: toml::Table) -> Result<()> {
    let mut doc: toml::Table = toml::from_str(&d.to_toml())?;
    let cal = toml::Table::try_from(&d.calibration)?;
    doc.insert("calibration".into(), toml::Value::Table(cal));
    doc.insert("run".into(), toml::Value::Table(run));
    sink.file(RESOLVED_CONFIG, toml::to_string_pretty(&doc)?.as_bytes())?;
    Ok(())
}

fn run_table(pairs: &[(&str, toml::Value)]) -> toml::Table {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn parse_label(s: &str) -> Result<ScenarioLabel> {
    s.parse().map_err(|e| CliError::Usage(format!("{e}")).into())
}

fn parse_numbers(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| CliError::Usage(format!("bad {what} `{s}`")).into())
}

/// `x,y,length,width` in world coordinates, or a lone road-frame `y` for
/// the default footprint of `label`.
fn parse_hazard(
    s: &str,
    label: ScenarioLabel,
    d: &Defaults,
    road: &RoadSpec,
    road_heading: f64,
) -> Result<HazardDescriptor> {
    let v = parse_numbers(s, "hazard")?;
    match v.as_slice() {
        [y] => Ok(default_hazard(label, d, road, road_heading, *y)),
        [x, y, length, width] => Ok(HazardDescriptor::new(
            [*x, *y],
            *length,
            *width,
            label.size,
            label.closeness,
        )?),
        _ => Err(CliError::Usage(format!("hazard `{s}` needs 1 or 4 numbers")).into()),
    }
}

fn default_hazard(
    label: ScenarioLabel,
    d: &Defaults,
    road: &RoadSpec,
    road_heading: f64,
    y: f64,
) -> HazardDescriptor {
    let mut h = d.hazards.hazard_for(label, road, y);
    h.center = point_from_hazard_centric(h.center, [0.0, 0.0], road_heading);
    h
}

fn csv_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

fn read_manifest(dir: &Path) -> Result<Option<Manifest>> {
    let p = dir.join(MANIFEST);
    if !p.exists() {
        return Ok(None);
    }
    let m: Manifest = serde_json::from_str(&read_text(&p)?)
        .with_context(|| format!("parsing {}", p.display()))?;
    Ok(Some(m))
}

fn load_demos(dir: &Path) -> Result<(Vec<PathBuf>, Vec<Trajectory>)> {
    let files = csv_files(dir)?;
    let mut demos = Vec::with_capacity(files.len());
    for f in &files {
        demos.push(load_trajectory(f, FrameKind::World).with_context(|| f.display().to_string())?);
    }
    Ok((files, demos))
}

fn train(
    d: &Defaults,
    sink: &Sink,
    demo_dir: &Path,
    label: Option<&str>,
    hazard: Option<&str>,
) -> Result<()> {
    let manifest = read_manifest(demo_dir)?;
    let label = match (label, &manifest) {
        (Some(l), _) => parse_label(l)?,
        (None, Some(m)) => parse_label(&m.label)?,
        (None, None) => return Err(CliError::Usage("--label is required without a manifest".into()).into()),
    };
    let road_heading = manifest.as_ref().map_or(d.generation.road_heading, |m| m.road_heading);
    let road = d.road.with_traffic(label.traffic);
    let hazard = match (hazard, &manifest) {
        (Some(h), _) => parse_hazard(h, label, d, &road, road_heading)?,
        (None, Some(m)) => m.hazard,
        (None, None) => return Err(CliError::Usage("--hazard is required without a manifest".into()).into()),
    };

    let files = csv_files(demo_dir)?;
    if files.len() < 2 {
        return Err(CliError::InsufficientDemos(format!(
            "{} holds {} trajectory CSV(s); need at least 2",
            demo_dir.display(),
            files.len()
        ))
        .into());
    }
    let (_, demos) = load_demos(demo_dir)?;
    let out = train_scenario_model(&demos, &hazard, &road, label, &d.training.options(road_heading))?;
    let m = &out.model;

    echo_config(
        sink,
        d,
        run_table(&[
            ("command", "train".into()),
            ("demo_dir", demo_dir.display().to_string().into()),
            ("label", label.to_string().into()),
            ("hazard", toml::Value::try_from(hazard)?),
            ("road_heading", road_heading.into()),
        ]),
    )?;
    sink.primary("model.json", &to_json(m))?;
    sink.note(&format!("demos: {}", demos.len()));
    sink.note(&format!("rejected: {:?}", out.rejected));
    sink.note(&format!("d_thresh: {:.3}", m.d_thresh));
    sink.note(&format!("keyframes: {}", m.keyframes.len()));
    Ok(())
}

fn generate(
    d: &Defaults,
    sink: &Sink,
    model_paths: &[PathBuf],
    hazard_specs: &[String],
    ego: &str,
    traffic: Option<&str>,
) -> Result<()> {
    if model_paths.len() != hazard_specs.len() {
        return Err(CliError::Usage(format!(
            "{} models for {} hazards",
            model_paths.len(),
            hazard_specs.len()
        ))
        .into());
    }
    let models: Vec<ScenarioModel> = model_paths
        .iter()
        .map(|p| model_from_json(&read_text(p)?).with_context(|| p.display().to_string()))
        .collect::<Result<_>>()?;
    let traffic = match traffic {
        Some("uni" | "unidirectional") => Traffic::Unidirectional,
        Some("bi" | "bidirectional") => Traffic::Bidirectional,
        Some(t) => return Err(CliError::Usage(format!("unknown traffic `{t}`")).into()),
        None => models[0].label.traffic,
    };
    let road = d.road.with_traffic(traffic);
    let cfg = d.generation;
    let hazards: Vec<HazardDescriptor> = hazard_specs
        .iter()
        .zip(&models)
        .map(|(s, m)| parse_hazard(s, m.label, d, &road, cfg.road_heading))
        .collect::<Result<_>>()?;
    let e = parse_numbers(ego, "ego")?;
    let [x, y, heading, speed] = e[..] else {
        return Err(CliError::Usage(format!("ego `{ego}` needs x,y,heading,speed")).into());
    };
    let ego_state = EgoState::new(x, y, heading, speed, &road, cfg.road_heading)?;
    let env = generate_multi(&models, &ego_state, &hazards, &road, &cfg)?;

    echo_config(
        sink,
        d,
        run_table(&[
            ("command", "generate".into()),
            (
                "models",
                toml::Value::Array(model_paths.iter().map(|p| p.display().to_string().into()).collect()),
            ),
            ("hazards", toml::Value::try_from(&hazards)?),
            ("ego", toml::Value::try_from(ego_state)?),
        ]),
    )?;
    sink.file("envelope.csv", env.to_csv().as_bytes())?;
    sink.primary("envelope.json", &to_json(&env))?;
    sink.note(&format!("grid points: {} over {:.1} m", env.grid.len(), env.horizon_m));
    for j in &env.junctions {
        sink.note(&format!("junction: hazards {} -> {} at y = {:.3}", j.first, j.second, j.y));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    d: &Defaults,
    sink: &Sink,
    seed: u64,
    label: &str,
    n: usize,
    style_mix: f64,
    factor: Option<&str>,
) -> Result<()> {
    let label = parse_label(label)?;
    let calibration = match factor {
        None => d.calibration.composite(label),
        Some(f) => {
            let f = match f {
                "small" | "moderate" => Factor::Small,
                "large" => Factor::Large,
                "near" => Factor::Near,
                "far" => Factor::Far,
                other => return Err(CliError::Usage(format!("unknown factor `{other}`")).into()),
            };
            d.calibration.marginal(label, f)
        }
    };
    let road = d.road.with_traffic(label.traffic);
    let road_heading = d.generation.road_heading;
    let hazard = default_hazard(label, d, &road, road_heading, 0.0);
    let pop = generate_population(
        n,
        &calibration,
        &hazard,
        &road,
        road_heading,
        seed,
        style_mix,
        &d.population,
        &d.generator,
    )?;

    let mut entries = Vec::with_capacity(n);
    for (i, demo) in pop.demos.iter().enumerate() {
        let name = format!("demo_{i:03}.csv");
        let text = write_trajectory_csv(&demo.trajectory);
        sink.file(&name, text.as_bytes())?;
        entries.push(ManifestDemo {
            file: name,
            seed: pop.seeds[i],
            sha256: sha256_hex(text.as_bytes()),
            onset_d_thresh: demo.onset_d_thresh,
            profile: pop.profiles[i],
        });
    }
    let manifest = Manifest {
        format_version: MANIFEST_FORMAT_VERSION,
        label: label.to_string(),
        master_seed: seed,
        style_mix,
        calibration,
        road,
        road_heading,
        hazard,
        demos: entries,
    };
    echo_config(
        sink,
        d,
        run_table(&[
            ("command", "simulate".into()),
            ("label", label.to_string().into()),
            ("n", (n as i64).into()),
            ("seed", seed.to_string().into()),
            ("style_mix", style_mix.into()),
            ("factor", factor.unwrap_or("composite").into()),
        ]),
    )?;
    sink.primary(MANIFEST, &to_json(&manifest))?;
    let mean = pop.demos.iter().map(|x| x.onset_d_thresh).sum::<f64>() / n as f64;
    sink.note(&format!("{n} demos of {label}, mean onset {mean:.2} m"));
    Ok(())
}

fn population(d: &Defaults, dir: &Path) -> Result<PopulationSample> {
    let m = read_manifest(dir)?
        .ok_or_else(|| CliError::Usage(format!("{} has no {MANIFEST}", dir.display())))?;
    let label = parse_label(&m.label)?;
    let (_, demos) = load_demos(dir)?;
    let hc: Vec<Trajectory> = demos
        .iter()
        .map(|t| to_hazard_centric(t, &m.hazard, m.road_heading))
        .collect::<Result<_, _>>()?;
    let lane_center = -point_to_hazard_centric(m.hazard.center, [0.0, 0.0], m.road_heading)[0];
    let onset = d.training.options(m.road_heading).onset;
    let d_thresh = estimate_d_thresh(&hc, lane_center, &onset)
        .with_context(|| format!("estimating the onset distance of {}", dir.display()))?;
    Ok(PopulationSample { label, hazard: m.hazard, road_heading: m.road_heading, d_thresh, demos })
}

fn analyze(d: &Defaults, sink: &Sink, dirs: &[PathBuf], pair_specs: &[String]) -> Result<()> {
    let pops: Vec<PopulationSample> = dirs.iter().map(|p| population(d, p)).collect::<Result<_>>()?;
    let mut pairs = Vec::new();
    if pair_specs.is_empty() {
        for i in 0..pops.len() {
            for j in i + 1..pops.len() {
                pairs.push((i, j));
            }
        }
    } else {
        for s in pair_specs {
            let v: Vec<usize> = s.split(',').filter_map(|x| x.trim().parse().ok()).collect();
            match v[..] {
                [i, j] if i < pops.len() && j < pops.len() && i != j => pairs.push((i, j)),
                _ => return Err(CliError::Usage(format!("bad pair `{s}`")).into()),
            }
        }
    }
    let mut report = SignificanceReport { rows: Vec::new() };
    for &(i, j) in &pairs {
        let road = d.road.with_traffic(pops[i].label.traffic);
        let r = significance_report(&pops[i], &pops[j], &road)
            .with_context(|| format!("{} vs {}", dirs[i].display(), dirs[j].display()))?;
        report.rows.extend(r.rows);
    }
    echo_config(
        sink,
        d,
        run_table(&[
            ("command", "analyze".into()),
            (
                "dirs",
                toml::Value::Array(dirs.iter().map(|p| p.display().to_string().into()).collect()),
            ),
            (
                "pairs",
                toml::Value::Array(
                    pairs.iter().map(|&(i, j)| format!("{i},{j}").into()).collect(),
                ),
            ),
        ]),
    )?;
    sink.file("report.json", to_json(&report).as_bytes())?;
    sink.primary("report.csv", &report.to_csv())?;
    for line in report.summary().lines() {
        sink.note(line);
    }
    Ok(())
}

fn plot(d: &Defaults, sink: &Sink, input: &Path) -> Result<()> {
    let text = read_text(input)?;
    let svg = match envelope_from_json(&text) {
        Ok(env) => envelope_svg(&env),
        Err(env_err) => match model_from_json(&text) {
            Ok(model) => model_svg(&model).map_err(|e| CliError::PlotInput(e.to_string()))?,
            Err(model_err) => {
                return Err(anyhow!(CliError::PlotInput(format!(
                    "{} is neither an envelope ({env_err}) nor a model ({model_err})",
                    input.display()
                ))))
            }
        },
    };
    let stem = input.file_stem().map_or("plot".into(), |s| s.to_string_lossy().into_owned());
    echo_config(
        sink,
        d,
        run_table(&[("command", "plot".into()), ("input", input.display().to_string().into())]),
    )?;
    sink.primary(&format!("{stem}.svg"), &svg)?;
    Ok(())
}
