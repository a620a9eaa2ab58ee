//! End-to-end orchestration: cluster one axis of the dataset with a
//! BIC-selected Gaussian mixture, trace a penalized least-squares path inside
//! each cluster, and rank features by when they enter the path. Also houses
//! the seeded single-index generator that produces Gaussian-design data with
//! a discrete response, the setting the method is meant for.

use std::fmt;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::data::{parse_dataset, standardize, Dataset, DEFAULT_LEVELS};
use crate::gmm::{fit_em, map_assign, map_prob, EmConfig, GmmParams};
use crate::lasso::{grid_path, LambdaGrid, LassoPath, LassoProblem};
use crate::modelsel::{scan_k, BicTable};
use crate::pca::{fit_pca, project};
use crate::plot::{bic_series, path_series, render_svg, PlotConfig};
use crate::rng::substream;

/// Which axis of the data matrix gets clustered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Axis {
    /// Cluster the rows (patients).
    Samples,
    /// Cluster the columns (genes). The default: the ranking step regresses
    /// the ordinal response on one cluster's worth of feature columns.
    #[default]
    Features,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::Samples => write!(f, "samples"),
            Axis::Features => write!(f, "features"),
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("cluster {0} is empty")]
    EmptyCluster(usize),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        source: Box<dyn std::error::Error + Send + Sync>,
    },
}

fn stage_err<E: std::error::Error + Send + Sync + 'static>(
    stage: &'static str,
) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError::Stage {
        stage,
        source: Box::new(e),
    }
}

/// How the clustering step is run.
#[derive(Debug, Clone)]
pub struct ClusterConfig {
    /// Project the clustered matrix onto this many principal components for
    /// the BIC scan; `None` scans the raw matrix.
    pub scan_components: Option<usize>,
    /// Refit the winning K on the raw matrix (the default) instead of on the
    /// projected scores used by the scan.
    pub final_fit_on_raw: bool,
    pub em: EmConfig,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            scan_components: Some(3),
            final_fit_on_raw: true,
            em: EmConfig::default(),
        }
    }
}

/// A completed clustering of one axis.
#[derive(Debug, Clone)]
pub struct ClusterRun {
    pub axis: Axis,
    /// 1-based cluster per clustered item.
    pub assignments: Vec<usize>,
    /// Posterior probability of each item's assigned cluster.
    pub map_probs: Vec<f64>,
    pub params: GmmParams,
    pub bic_table: BicTable,
}

impl ClusterRun {
    /// Validate: assignment values in `1..=K` with no empty cluster, and one
    /// probability per assignment.
    pub fn new(
        axis: Axis,
        assignments: Vec<usize>,
        map_probs: Vec<f64>,
        params: GmmParams,
        bic_table: BicTable,
    ) -> Result<Self, PipelineError> {
        let k = params.k();
        if map_probs.len() != assignments.len() {
            return Err(PipelineError::Invalid(format!(
                "{} probabilities for {} assignments",
                map_probs.len(),
                assignments.len()
            )));
        }
        let mut counts = vec![0usize; k];
        for &a in &assignments {
            if a < 1 || a > k {
                return Err(PipelineError::Invalid(format!(
                    "assignment {a} outside 1..={k}"
                )));
            }
            counts[a - 1] += 1;
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(PipelineError::EmptyCluster(empty + 1));
        }
        Ok(Self {
            axis,
            assignments,
            map_probs,
            params,
            bic_table,
        })
    }

    pub fn k(&self) -> usize {
        self.params.k()
    }

    /// 0-based positions (on the clustered axis) belonging to `cluster_id`.
    pub fn members(&self, cluster_id: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == cluster_id)
            .map(|(i, _)| i)
            .collect()
    }

    /// CSV with header `id,cluster,map_prob`; ids are feature names on the
    /// feature axis and 1-based row numbers on the sample axis.
    pub fn assignments_csv(&self, d: &Dataset) -> String {
        let mut out = String::from("id,cluster,map_prob\n");
        for (i, (&c, &pr)) in self.assignments.iter().zip(&self.map_probs).enumerate() {
            let id = match self.axis {
                Axis::Features => d.feature_names[i].clone(),
                Axis::Samples => (i + 1).to_string(),
            };
            out.push_str(&format!("{id},{c},{pr}\n"));
        }
        out
    }
}

/// Scan K over the chosen axis (optionally through a PCA projection), then
/// fit the winning K and hard-assign every item.
pub fn cluster_dataset(
    d: &Dataset,
    axis: Axis,
    k_min: usize,
    k_max: usize,
    cfg: &ClusterConfig,
) -> Result<ClusterRun, PipelineError> {
    let raw = match axis {
        Axis::Samples => d.x.clone(),
        Axis::Features => d.x.transpose(),
    };
    if raw.nrows() <= k_max {
        return Err(PipelineError::Invalid(format!(
            "{} items on the {axis} axis cannot support K up to {k_max}",
            raw.nrows()
        )));
    }
    let scan_matrix = match cfg.scan_components {
        Some(c) => {
            let model = fit_pca(&raw, c).map_err(stage_err("cluster"))?;
            project(&model, &raw).map_err(stage_err("cluster"))?
        }
        None => raw.clone(),
    };
    let bic_table = scan_k(&scan_matrix, k_min, k_max, &cfg.em).map_err(stage_err("cluster"))?;
    let fit_matrix = if cfg.final_fit_on_raw { &raw } else { &scan_matrix };
    let (params, resp, _) =
        fit_em(fit_matrix, bic_table.best_k, &cfg.em).map_err(stage_err("cluster"))?;
    let assignments = map_assign(&resp);
    let map_probs = map_prob(&resp);
    ClusterRun::new(axis, assignments, map_probs, params, bic_table)
}

/// One ranked feature: when it entered the path, its sign, and its magnitude
/// at the smallest penalty on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedFeature {
    pub feature: String,
    pub entry_lambda: f64,
    /// +1 or -1; the sign of the most recent nonzero coefficient.
    pub sign: i32,
    /// |coefficient| at the final grid point.
    pub final_coef: f64,
}

/// Features ordered by importance: entry penalty descending, final magnitude
/// breaking ties, name breaking the rest. Features that never enter the path
/// are excluded.
#[derive(Debug, Clone, Default)]
pub struct FeatureRanking {
    pub entries: Vec<RankedFeature>,
}

impl FeatureRanking {
    /// CSV with header `rank,feature,entry_lambda,sign,final_coef`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,feature,entry_lambda,sign,final_coef\n");
        for (i, e) in self.entries.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                i + 1,
                e.feature,
                e.entry_lambda,
                e.sign,
                e.final_coef
            ));
        }
        out
    }
}

/// Rank the features of a path by their entry penalty, largest first.
pub fn rank_features(path: &LassoPath, names: &[String]) -> FeatureRanking {
    assert_eq!(
        names.len(),
        path.n_features(),
        "one name per path feature"
    );
    let last = path.lambdas().len() - 1;
    let mut entries: Vec<RankedFeature> = Vec::new();
    for (j, name) in names.iter().enumerate() {
        let Some(entry_lambda) = path.entry_lambda()[j] else {
            continue;
        };
        // the sign comes from the most recent nonzero coefficient, so a
        // feature that entered and later dropped back to zero keeps the sign
        // it had while active
        let signed = (0..=last)
            .rev()
            .map(|i| path.coefs()[(i, j)])
            .find(|&v| v != 0.0)
            .expect("entered features have a nonzero coefficient somewhere");
        entries.push(RankedFeature {
            feature: name.clone(),
            entry_lambda,
            sign: if signed > 0.0 { 1 } else { -1 },
            final_coef: path.coefs()[(last, j)].abs(),
        });
    }
    entries.sort_by(|a, b| {
        b.entry_lambda
            .total_cmp(&a.entry_lambda)
            .then(b.final_coef.total_cmp(&a.final_coef))
            .then(a.feature.cmp(&b.feature))
    });
    FeatureRanking { entries }
}

/// Solve the penalized path for one cluster and rank its features.
///
/// On the feature axis the ordinal response is regressed on the cluster's
/// columns; on the sample axis the response is restricted to the cluster's
/// rows and regressed on every column.
pub fn clusterwise_lasso(
    d: &Dataset,
    run: &ClusterRun,
    cluster_id: usize,
    grid: LambdaGrid,
) -> Result<(LassoPath, FeatureRanking), PipelineError> {
    let k = run.k();
    if cluster_id < 1 || cluster_id > k {
        return Err(PipelineError::Invalid(format!(
            "cluster {cluster_id} outside 1..={k}"
        )));
    }
    let members = run.members(cluster_id);
    if members.is_empty() {
        return Err(PipelineError::EmptyCluster(cluster_id));
    }
    let (x, y, names): (DMatrix<f64>, DVector<f64>, Vec<String>) = match run.axis {
        Axis::Features => {
            let x = d.x.select_columns(members.iter());
            let y = DVector::from_vec(d.labels_f64());
            let names = members
                .iter()
                .map(|&j| d.feature_names[j].clone())
                .collect();
            (x, y, names)
        }
        Axis::Samples => {
            if members.len() < d.p() + 2 {
                log::warn!(
                    "cluster {cluster_id} has {} rows for {} features; the fit is underdetermined",
                    members.len(),
                    d.p()
                );
            }
            let x = d.x.select_rows(members.iter());
            let y = DVector::from_iterator(
                members.len(),
                members.iter().map(|&i| d.labels[i] as f64),
            );
            (x, y, d.feature_names.clone())
        }
    };
    let (prob, _, _) = LassoProblem::from_raw(&x, &y).map_err(stage_err("lasso"))?;
    let path = grid_path(&prob, grid).map_err(stage_err("lasso"))?;
    let ranking = rank_features(&path, &names);
    Ok((path, ranking))
}

/// The discrete (or identity) link applied to the latent index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    /// Response = the latent index itself. The dataset's label column is a
    /// single placeholder level; use [`SynthData::response`] for the values.
    Linear,
    /// Four ordered levels split by three thresholds, named like tumor states
    /// so the CSV parses under the default level order.
    Ordinal4,
    /// Two levels by the sign of the latent index.
    Sign,
}

/// Default ordinal cut points: symmetric, all four levels get real mass.
pub const DEFAULT_THRESHOLDS: [f64; 3] = [-1.0, 0.0, 1.0];

/// Recipe for a synthetic single-index dataset: standard normal design,
/// latent `t = <x, b*> + noise_sd * g`, response = link(t), with `b*` having
/// `s` nonzero entries of equal magnitude and unit overall norm.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub n: usize,
    pub p: usize,
    /// Support size; 0 plants no signal (useful for calibration checks).
    pub s: usize,
    pub link: Link,
    pub thresholds: [f64; 3],
    pub noise_sd: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(n: usize, p: usize, s: usize, link: Link, seed: u64) -> Self {
        Self {
            n,
            p,
            s,
            link,
            thresholds: DEFAULT_THRESHOLDS,
            noise_sd: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.n < 2 {
            return Err(PipelineError::Invalid("need n >= 2 rows".into()));
        }
        if self.p < 1 {
            return Err(PipelineError::Invalid("need p >= 1 features".into()));
        }
        if self.s > self.p {
            return Err(PipelineError::Invalid(format!(
                "support size {} exceeds {} features",
                self.s, self.p
            )));
        }
        if !(self.thresholds[0] < self.thresholds[1] && self.thresholds[1] < self.thresholds[2]) {
            return Err(PipelineError::Invalid(
                "thresholds must be strictly increasing".into(),
            ));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(PipelineError::Invalid(
                "noise_sd must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// A generated dataset plus the ground truth behind it.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub dataset: Dataset,
    /// What the link produced: the latent index for [`Link::Linear`], the
    /// sign (-1/+1) for [`Link::Sign`], the 1-based level for
    /// [`Link::Ordinal4`].
    pub response: DVector<f64>,
    /// Sorted 0-based indices of the nonzero entries of the true direction.
    pub support: Vec<usize>,
    /// The unit-norm true direction `b*`.
    pub direction: DVector<f64>,
}

/// Draw a synthetic dataset. Bit-reproducible per seed: the design, support,
/// signs, and noise each come from their own named substream of `spec.seed`.
pub fn generate_synth(spec: &SynthSpec) -> Result<SynthData, PipelineError> {
    spec.validate()?;
    let (n, p) = (spec.n, spec.p);

    let mut design_rng = substream(spec.seed, "synth:design");
    let x = DMatrix::from_fn(n, p, |_, _| design_rng.sample::<f64, _>(StandardNormal));

    let mut support_rng = substream(spec.seed, "synth:support");
    let mut support: Vec<usize> = if spec.s > 0 {
        rand::seq::index::sample(&mut support_rng, p, spec.s).into_vec()
    } else {
        Vec::new()
    };
    support.sort_unstable();
    let mut direction = DVector::zeros(p);
    if spec.s > 0 {
        let magnitude = 1.0 / (spec.s as f64).sqrt();
        for &j in &support {
            direction[j] = if support_rng.random::<bool>() {
                magnitude
            } else {
                -magnitude
            };
        }
    }

    let mut noise_rng = substream(spec.seed, "synth:noise");
    let latent: DVector<f64> = &x * &direction
        + DVector::from_fn(n, |_, _| {
            spec.noise_sd * noise_rng.sample::<f64, _>(StandardNormal)
        });

    let feature_names: Vec<String> = (1..=p).map(|j| format!("f{j}")).collect();
    let (labels, level_names, response): (Vec<usize>, Vec<String>, DVector<f64>) = match spec.link
    {
        Link::Linear => (
            vec![1; n],
            vec!["latent".to_string()],
            latent.clone(),
        ),
        Link::Ordinal4 => {
            let labels: Vec<usize> = latent
                .iter()
                .map(|&t| 1 + spec.thresholds.iter().filter(|&&th| th < t).count())
                .collect();
            let response = DVector::from_iterator(n, labels.iter().map(|&l| l as f64));
            let names = DEFAULT_LEVELS.iter().map(|s| s.to_string()).collect();
            (labels, names, response)
        }
        Link::Sign => {
            let labels: Vec<usize> = latent.iter().map(|&t| if t < 0.0 { 1 } else { 2 }).collect();
            let response =
                DVector::from_iterator(n, latent.iter().map(|&t| if t < 0.0 { -1.0 } else { 1.0 }));
            (labels, vec!["neg".to_string(), "pos".to_string()], response)
        }
    };

    let dataset = Dataset::new(labels, level_names, x, feature_names)
        .map_err(stage_err("synth"))?;
    Ok(SynthData {
        dataset,
        response,
        support,
        direction,
    })
}

/// Everything `run_pipeline` needs, with the defaults the command line uses.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub output_dir: PathBuf,
    pub label_col: String,
    pub standardize: bool,
    /// Natural-log transform of every matrix entry before anything else;
    /// requires strictly positive data.
    pub log_transform: bool,
    pub axis: Axis,
    pub k_min: usize,
    pub k_max: usize,
    pub cluster: ClusterConfig,
    pub grid: LambdaGrid,
}

impl PipelineConfig {
    pub fn new(input: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            input: input.into(),
            output_dir: output_dir.into(),
            label_col: "state".to_string(),
            standardize: true,
            log_transform: false,
            axis: Axis::Features,
            k_min: 1,
            k_max: 10,
            cluster: ClusterConfig::default(),
            grid: LambdaGrid {
                start: 0.1,
                end: 0.03,
                step: 0.001,
            },
        }
    }
}

/// The pipeline's outputs, in cluster-index order.
#[derive(Debug)]
pub struct PipelineOutput {
    pub run: ClusterRun,
    pub paths: Vec<(usize, LassoPath)>,
    pub rankings: Vec<(usize, FeatureRanking)>,
    /// Files written, in write order.
    pub artifacts: Vec<PathBuf>,
}

fn write_artifact(
    dir: &Path,
    name: &str,
    content: &str,
    artifacts: &mut Vec<PathBuf>,
) -> Result<(), PipelineError> {
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(stage_err("write"))?;
    artifacts.push(path);
    Ok(())
}

/// Parse, transform, cluster, and run the per-cluster paths, writing every
/// CSV and SVG artifact into the output directory. Deterministic for a fixed
/// EM seed.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    let text = std::fs::read_to_string(&cfg.input).map_err(stage_err("read"))?;
    let mut dataset = parse_dataset(&text, &cfg.label_col).map_err(stage_err("parse"))?;

    if cfg.log_transform {
        if dataset.x.iter().any(|&v| v <= 0.0) {
            return Err(PipelineError::Stage {
                stage: "transform",
                source: "log transform requires strictly positive values".into(),
            });
        }
        dataset.x = dataset.x.map(f64::ln);
    }
    if cfg.standardize {
        let (xs, _) = standardize(&dataset.x).map_err(stage_err("transform"))?;
        dataset.x = xs;
    }

    let run = cluster_dataset(&dataset, cfg.axis, cfg.k_min, cfg.k_max, &cfg.cluster)?;

    let mut paths = Vec::new();
    let mut rankings = Vec::new();
    for cluster_id in 1..=run.k() {
        let (path, ranking) = clusterwise_lasso(&dataset, &run, cluster_id, cfg.grid)?;
        paths.push((cluster_id, path));
        rankings.push((cluster_id, ranking));
    }

    std::fs::create_dir_all(&cfg.output_dir).map_err(stage_err("write"))?;
    let mut artifacts = Vec::new();
    write_artifact(
        &cfg.output_dir,
        "bic.csv",
        &run.bic_table.to_csv(),
        &mut artifacts,
    )?;
    write_artifact(
        &cfg.output_dir,
        "assignments.csv",
        &run.assignments_csv(&dataset),
        &mut artifacts,
    )?;
    let bic_svg = render_svg(
        &bic_series(&run.bic_table),
        &PlotConfig {
            x_label: "K".to_string(),
            y_label: "log(bic - min + 1)".to_string(),
            ..PlotConfig::default()
        },
    )
    .map_err(stage_err("write"))?;
    write_artifact(&cfg.output_dir, "bic.svg", &bic_svg, &mut artifacts)?;

    for (cluster_id, path) in &paths {
        let names: Vec<String> = match cfg.axis {
            Axis::Features => run
                .members(*cluster_id)
                .iter()
                .map(|&j| dataset.feature_names[j].clone())
                .collect(),
            Axis::Samples => dataset.feature_names.clone(),
        };
        write_artifact(
            &cfg.output_dir,
            &format!("cluster_{cluster_id}_path.csv"),
            &path.to_csv(&names),
            &mut artifacts,
        )?;
        let svg = render_svg(
            &path_series(path, &names),
            &PlotConfig {
                x_label: "lambda".to_string(),
                y_label: "coefficient".to_string(),
                x_descending: true,
                ..PlotConfig::default()
            },
        )
        .map_err(stage_err("write"))?;
        write_artifact(
            &cfg.output_dir,
            &format!("cluster_{cluster_id}_path.svg"),
            &svg,
            &mut artifacts,
        )?;
    }
    for (cluster_id, ranking) in &rankings {
        write_artifact(
            &cfg.output_dir,
            &format!("cluster_{cluster_id}_ranking.csv"),
            &ranking.to_csv(),
            &mut artifacts,
        )?;
    }

    Ok(PipelineOutput {
        run,
        paths,
        rankings,
        artifacts,
    })
}
