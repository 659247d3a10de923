//! JSON formats for measures, instances, reports and potentials.
//!
//! Floats are written in shortest round-trip form, so reading back a written
//! table reproduces it bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Point;
use crate::lp::{self, Coupling, Objective, PotentialSet, SolveReport};
use crate::measures::{DiscreteMeasure, RadialMeasure};
use crate::radial::{RadialPotential, RadialSolution};

/// Either kind of measure, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub enum Measure {
    Discrete(DiscreteMeasure),
    Radial(RadialMeasure),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum MeasureJson {
    Discrete {
        dim: usize,
        atoms: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
    Radial {
        quantile_u: Vec<f64>,
        quantile_r: Vec<f64>,
    },
}

impl Measure {
    pub fn as_discrete(&self) -> Result<&DiscreteMeasure> {
        match self {
            Measure::Discrete(m) => Ok(m),
            Measure::Radial(_) => Err(Error::Format("expected a discrete measure".into())),
        }
    }

    pub fn as_radial(&self) -> Result<&RadialMeasure> {
        match self {
            Measure::Radial(m) => Ok(m),
            Measure::Discrete(_) => Err(Error::Format("expected a radial measure".into())),
        }
    }

    fn to_json(&self) -> MeasureJson {
        match self {
            Measure::Discrete(m) => MeasureJson::Discrete {
                dim: m.dim(),
                atoms: m.atoms().iter().map(|a| a.coords().to_vec()).collect(),
                weights: m.weights().to_vec(),
            },
            Measure::Radial(m) => MeasureJson::Radial {
                quantile_u: m.knots_u().to_vec(),
                quantile_r: m.knots_r().to_vec(),
            },
        }
    }

    fn from_json(j: MeasureJson) -> Result<Self> {
        match j {
            MeasureJson::Discrete { dim, atoms, weights } => {
                let atoms = atoms.into_iter().map(Point::new).collect::<Result<Vec<_>>>()?;
                Ok(Measure::Discrete(DiscreteMeasure::new(dim, atoms, weights)?))
            }
            MeasureJson::Radial { quantile_u, quantile_r } => {
                Ok(Measure::Radial(RadialMeasure::from_table(quantile_u, quantile_r)?))
            }
        }
    }
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
}

fn render<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

pub fn measure_from_json(text: &str) -> Result<Measure> {
    Measure::from_json(parse(text)?)
}

pub fn measure_to_json(m: &Measure) -> String {
    render(&m.to_json())
}

/// A list of marginals with an optional objective.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceFile {
    pub objective: Option<Objective>,
    pub marginals: Vec<Measure>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    objective: Option<Objective>,
    marginals: Vec<MeasureJson>,
}

impl InstanceFile {
    pub fn discrete(&self) -> Result<Vec<DiscreteMeasure>> {
        self.marginals.iter().map(|m| m.as_discrete().cloned()).collect()
    }

    pub fn radial(&self) -> Result<Vec<RadialMeasure>> {
        self.marginals.iter().map(|m| m.as_radial().cloned()).collect()
    }
}

pub fn instance_from_json(text: &str) -> Result<InstanceFile> {
    let j: InstanceJson = parse(text)?;
    if j.marginals.is_empty() {
        return Err(Error::Format("instance has no marginals".into()));
    }
    Ok(InstanceFile {
        objective: j.objective,
        marginals: j.marginals.into_iter().map(Measure::from_json).collect::<Result<_>>()?,
    })
}

pub fn instance_to_json(inst: &InstanceFile) -> String {
    render(&InstanceJson {
        objective: inst.objective,
        marginals: inst.marginals.iter().map(Measure::to_json).collect(),
    })
}

/// Serialized [`SolveReport`]: values, gap, nonzero plan entries and
/// potentials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub objective: Objective,
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub certified: bool,
    pub pivots: usize,
    pub sizes: Vec<usize>,
    pub plan: Vec<(Vec<usize>, f64)>,
    pub potentials: Vec<Vec<f64>>,
}

impl ReportJson {
    pub fn new(report: &SolveReport, objective: Objective) -> Self {
        Self {
            objective,
            primal_value: report.primal_value,
            dual_value: report.dual_value,
            gap: report.gap,
            certified: lp::is_certified(report),
            pivots: report.pivots,
            sizes: report.plan.sizes.clone(),
            plan: report.plan.entries.clone(),
            potentials: report.potentials.tables.clone(),
        }
    }

    pub fn coupling(&self) -> Coupling {
        Coupling {
            sizes: self.sizes.clone(),
            entries: self.plan.clone(),
        }
    }

    pub fn potential_set(&self) -> PotentialSet {
        PotentialSet {
            tables: self.potentials.clone(),
        }
    }
}

pub fn report_to_json(report: &ReportJson) -> String {
    render(report)
}

pub fn report_from_json(text: &str) -> Result<ReportJson> {
    parse(text)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RadialPotentialJson {
    knots: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

/// Potentials file: radial tables or discrete tables.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialsFile {
    Radial(Vec<RadialPotential>),
    Discrete(PotentialSet),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum PotentialsJson {
    RadialPotentials { potentials: Vec<RadialPotentialJson> },
    DiscretePotentials { tables: Vec<Vec<f64>> },
}

pub fn potentials_to_json(p: &PotentialsFile) -> String {
    let j = match p {
        PotentialsFile::Radial(ps) => PotentialsJson::RadialPotentials {
            potentials: ps
                .iter()
                .map(|p| RadialPotentialJson {
                    knots: p.knots().to_vec(),
                    values: p.values().to_vec(),
                    slopes: p.slopes().to_vec(),
                })
                .collect(),
        },
        PotentialsFile::Discrete(ps) => PotentialsJson::DiscretePotentials {
            tables: ps.tables.clone(),
        },
    };
    render(&j)
}

pub fn potentials_from_json(text: &str) -> Result<PotentialsFile> {
    match parse(text)? {
        PotentialsJson::RadialPotentials { potentials } => Ok(PotentialsFile::Radial(
            potentials
                .into_iter()
                .map(|p| RadialPotential::new(p.knots, p.values, p.slopes))
                .collect::<Result<_>>()?,
        )),
        PotentialsJson::DiscretePotentials { tables } => Ok(PotentialsFile::Discrete(PotentialSet { tables })),
    }
}

/// Summary written next to radial samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialSummary {
    pub d: usize,
    pub n: usize,
    pub seed: u64,
    pub value_closed_form: f64,
    pub dual_value: f64,
    pub value_empirical: Option<f64>,
    pub stderr: Option<f64>,
}

impl RadialSummary {
    pub fn new(sol: &RadialSolution, n: usize, seed: u64, dets: &[f64]) -> Self {
        let (mean, stderr) = if dets.is_empty() {
            (None, None)
        } else {
            let m = dets.iter().sum::<f64>() / dets.len() as f64;
            let var = dets.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / dets.len() as f64;
            (Some(m), Some((var / dets.len() as f64).sqrt()))
        };
        Self {
            d: sol.dim(),
            n,
            seed,
            value_closed_form: sol.value(),
            dual_value: sol.dual_value(),
            value_empirical: mean,
            stderr,
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    render(value)
}

pub fn from_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    parse(text)
}
