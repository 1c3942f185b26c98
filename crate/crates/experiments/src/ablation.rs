use crate::corpus::min_depth_for_diameter;
use crate::model::Template;
use crate::task::{analytic_max_mixing, build_dataset, Dataset, MixingKind, TaskSpec};
use crate::train::{train, LrSchedule, TrainConfig, TrainReport};
use crate::{ExperimentError, Result};
use serde::{Deserialize, Serialize};
use squashscope::bounds::{build_message_matrix, osq_tilde, MixingConstants};
use squashscope::{Extended, Graph};
use std::fmt::Write as _;
use std::str::FromStr;

pub const CSV_HEADER: &str = "grid_value,model,mae_mean,mae_std,rel_mae_mean,osq_mean,status";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationKind {
    CommuteTime,
    Depth,
    Mixing,
}

impl FromStr for AblationKind {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "commute" | "commute_time" => Ok(AblationKind::CommuteTime),
            "depth" => Ok(AblationKind::Depth),
            "mixing" => Ok(AblationKind::Mixing),
            other => Err(ExperimentError::Config(format!(
                "unknown ablation {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingCase {
    pub kind: MixingKind,
    pub interval: (f64, f64),
}

impl MixingCase {
    pub fn label(&self) -> String {
        format!(
            "{}:{}:{}",
            self.kind.name(),
            self.interval.0,
            self.interval.1
        )
    }
}

/// Everything an ablation needs besides the graphs; the training depth is set per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationConfig {
    pub train: TrainConfig,
    pub templates: Vec<Template>,
    pub samples_per_graph: usize,
    pub alphas: Vec<f64>,
    /// Quantile for the depth and mixing ablations.
    pub fixed_alpha: f64,
    /// Depths added to the under-reaching floor in the depth ablation.
    pub extra_depths: Vec<usize>,
    pub mixing_cases: Vec<MixingCase>,
    pub seed: u64,
}

impl AblationConfig {
    pub fn reference(seed: u64) -> Self {
        AblationConfig {
            train: TrainConfig {
                depth: 1,
                width: 24,
                learning_rate: 1e-3,
                beta1: 0.9,
                beta2: 0.999,
                epochs: 30,
                batch_size: 16,
                restarts: 3,
                seed,
                schedule: LrSchedule::Cosine,
                init_gain: 1.0,
            },
            templates: Template::ALL.to_vec(),
            samples_per_graph: 10,
            alphas: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            fixed_alpha: 0.8,
            extra_depths: vec![8, 16],
            mixing_cases: vec![
                MixingCase {
                    kind: MixingKind::TanhSum,
                    interval: (0.0, 1.0),
                },
                MixingCase {
                    kind: MixingKind::ExpSum,
                    interval: (0.0, 1.0),
                },
                MixingCase {
                    kind: MixingKind::ExpSum,
                    interval: (0.0, 1.5),
                },
            ],
            seed,
        }
    }
}

/// Constants used for the ÕSQ column: they satisfy `ω/w + c1 γ + c2 ≤ 1` with `w = 1`.
pub fn reference_constants(template: Template) -> MixingConstants {
    MixingConstants {
        omega: 0.5,
        w: 1.0,
        c1: 0.0,
        c2: 0.5,
        c2nd: if template.gated() { 0.25 } else { 0.0 },
        c_sigma: 1.0,
    }
}

/// Mean ÕSQ of the dataset pairs at depth `m`; infinite if any pair is under-reached.
pub fn mean_osq(
    graphs: &[Graph],
    data: &Dataset,
    template: Template,
    m: usize,
) -> Result<Extended> {
    let c = reference_constants(template);
    let mut total = 0.0;
    for (g, &pair) in graphs.iter().zip(&data.pairs) {
        let a = build_message_matrix(g, template.kind())?;
        match osq_tilde(g, &a, &c, m, pair)? {
            Extended::Finite(x) => total += x,
            Extended::Infinite => return Ok(Extended::Infinite),
        }
    }
    Ok(Extended::Finite(total / graphs.len() as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub grid_value: String,
    pub model: Template,
    pub mae_mean: f64,
    pub mae_std: f64,
    pub rel_mae_mean: f64,
    pub osq_mean: Extended,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<TrainReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub case: MixingCase,
    pub analytic_max_mixing: f64,
    pub rel_mae: Vec<(Template, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub kind: AblationKind,
    /// Depth used wherever it is not the grid variable.
    pub depth: usize,
    pub rows: Vec<AblationRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub table1: Vec<Table1Row>,
}

fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else {
        "nan".into()
    }
}

impl AblationTable {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{CSV_HEADER}\n");
        for r in &self.rows {
            let osq = match r.osq_mean {
                Extended::Finite(x) => fmt_num(x),
                Extended::Infinite => "inf".into(),
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.grid_value,
                r.model.name(),
                fmt_num(r.mae_mean),
                fmt_num(r.mae_std),
                fmt_num(r.rel_mae_mean),
                osq,
                r.status
            );
        }
        out
    }

    /// One row per mixing case, one relative-MAE column per template.
    pub fn table1_csv(&self) -> Option<String> {
        let first = self.table1.first()?;
        let mut out = String::from("kind,interval_lo,interval_hi,analytic_max_mixing");
        for (t, _) in &first.rel_mae {
            let _ = write!(out, ",rel_mae_{}", t.name());
        }
        out.push('\n');
        for row in &self.table1 {
            let _ = write!(
                out,
                "{},{},{},{}",
                row.case.kind.name(),
                row.case.interval.0,
                row.case.interval.1,
                fmt_num(row.analytic_max_mixing)
            );
            for (_, v) in &row.rel_mae {
                let _ = write!(out, ",{}", fmt_num(*v));
            }
            out.push('\n');
        }
        Some(out)
    }

    pub fn rows_for(&self, template: Template) -> impl Iterator<Item = &AblationRow> {
        self.rows.iter().filter(move |r| r.model == template)
    }
}

fn cell(
    grid_value: String,
    template: Template,
    graphs: &[Graph],
    data: &Dataset,
    cfg: &TrainConfig,
) -> Result<AblationRow> {
    let osq_mean = mean_osq(graphs, data, template, cfg.depth)?;
    Ok(match train(template, graphs, data, cfg) {
        Ok(report) => {
            let done = report.finished();
            let status = if done == cfg.restarts {
                "ok".to_string()
            } else if done == 0 {
                "diverged".to_string()
            } else {
                format!("partial_{done}_of_{}", cfg.restarts)
            };
            AblationRow {
                grid_value,
                model: template,
                mae_mean: report.test_mae_mean,
                mae_std: report.test_mae_std,
                rel_mae_mean: report.rel_mae_mean,
                osq_mean,
                status,
                report: Some(report),
            }
        }
        Err(e) => AblationRow {
            grid_value,
            model: template,
            mae_mean: f64::NAN,
            mae_std: f64::NAN,
            rel_mae_mean: f64::NAN,
            osq_mean,
            status: format!("error: {e}").replace(',', ";"),
            report: None,
        },
    })
}

/// `max_i ⌈d(u_i, v_i)/2⌉` over the selected pairs.
pub fn min_depth_for_pairs(graphs: &[Graph], data: &Dataset) -> Result<usize> {
    let mut m = 1;
    for (g, &p) in graphs.iter().zip(&data.pairs) {
        m = m.max(g.shortest_distance(p)?.div_ceil(2));
    }
    Ok(m)
}

fn spec(cfg: &AblationConfig, case: MixingCase, alpha: f64) -> TaskSpec {
    TaskSpec {
        mixing_kind: case.kind,
        input_interval: case.interval,
        alpha,
        samples_per_graph: cfg.samples_per_graph,
        seed: cfg.seed,
    }
}

/// Runs one ablation. Rows are sorted by grid value, then template order.
pub fn run_ablation(
    kind: AblationKind,
    graphs: &[Graph],
    cfg: &AblationConfig,
) -> Result<AblationTable> {
    if cfg.templates.is_empty() {
        return Err(ExperimentError::Config("no model templates".into()));
    }
    let base_depth = min_depth_for_diameter(graphs)?;
    let tanh = MixingCase {
        kind: MixingKind::TanhSum,
        interval: (0.0, 1.0),
    };
    let mut rows = Vec::new();
    let mut table1 = Vec::new();
    let mut depth = base_depth;
    match kind {
        AblationKind::CommuteTime => {
            let mut alphas = cfg.alphas.clone();
            alphas.sort_by(f64::total_cmp);
            let train_cfg = TrainConfig {
                depth,
                ..cfg.train.clone()
            };
            for alpha in alphas {
                let data = build_dataset(&spec(cfg, tanh, alpha), graphs)?;
                for &t in &cfg.templates {
                    rows.push(cell(format!("{alpha}"), t, graphs, &data, &train_cfg)?);
                }
            }
        }
        AblationKind::Depth => {
            let data = build_dataset(&spec(cfg, tanh, cfg.fixed_alpha), graphs)?;
            depth = min_depth_for_pairs(graphs, &data)?;
            let mut grid: Vec<usize> = cfg
                .extra_depths
                .iter()
                .copied()
                .chain([depth])
                .filter(|&m| m >= depth)
                .collect();
            grid.sort_unstable();
            grid.dedup();
            for m in grid {
                let train_cfg = TrainConfig {
                    depth: m,
                    ..cfg.train.clone()
                };
                for &t in &cfg.templates {
                    rows.push(cell(format!("{m}"), t, graphs, &data, &train_cfg)?);
                }
            }
        }
        AblationKind::Mixing => {
            let train_cfg = TrainConfig {
                depth,
                ..cfg.train.clone()
            };
            for &case in &cfg.mixing_cases {
                let data = build_dataset(&spec(cfg, case, cfg.fixed_alpha), graphs)?;
                let mut rel_mae = Vec::new();
                for &t in &cfg.templates {
                    let row = cell(case.label(), t, graphs, &data, &train_cfg)?;
                    rel_mae.push((t, row.rel_mae_mean));
                    rows.push(row);
                }
                let analytic = analytic_max_mixing(case.kind, case.interval.0, case.interval.1)?;
                table1.push(Table1Row {
                    case,
                    analytic_max_mixing: analytic,
                    rel_mae,
                });
            }
        }
    }
    Ok(AblationTable {
        kind,
        depth,
        rows,
        table1,
    })
}

/// One trend check on one template's rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendFlag {
    pub model: Template,
    pub trend: String,
    pub holds: bool,
}

fn osq_value(e: Extended) -> f64 {
    match e {
        Extended::Finite(x) => x,
        Extended::Infinite => f64::INFINITY,
    }
}

impl AblationTable {
    /// The qualitative trends each ablation is expected to show, per template.
    pub fn trends(&self) -> Vec<TrendFlag> {
        let mut templates: Vec<Template> = Vec::new();
        for r in &self.rows {
            if !templates.contains(&r.model) {
                templates.push(r.model);
            }
        }
        let mut out = Vec::new();
        let mut flag = |model, trend: &str, holds| {
            out.push(TrendFlag {
                model,
                trend: trend.into(),
                holds,
            })
        };
        for t in templates {
            let rows: Vec<&AblationRow> = self.rows_for(t).collect();
            let mae: Vec<f64> = rows.iter().map(|r| r.mae_mean).collect();
            let rel: Vec<f64> = rows.iter().map(|r| r.rel_mae_mean).collect();
            let osq: Vec<f64> = rows.iter().map(|r| osq_value(r.osq_mean)).collect();
            match self.kind {
                AblationKind::CommuteTime => {
                    flag(t, "mae_nondecreasing", mae.windows(2).all(|w| w[0] <= w[1]));
                    flag(t, "osq_increasing", osq.windows(2).all(|w| w[0] < w[1]));
                }
                AblationKind::Depth => {
                    let improves = matches!((mae.first(), mae.last()), (Some(a), Some(b)) if mae.len() > 1 && b < a);
                    flag(t, "deepest_beats_shallowest", improves);
                    flag(t, "osq_decreasing", osq.windows(2).all(|w| w[0] > w[1]));
                }
                AblationKind::Mixing => {
                    flag(t, "rel_mae_increasing", rel.windows(2).all(|w| w[0] < w[1]));
                }
            }
        }
        out
    }
}
