use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{FlowVector, Frame, FramePair, Point3, Pose};
use crate::scalar::Real;

/// Errors raised by problem validation and cost assembly.
#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("per-point arrays disagree in length: {0}")]
    LengthMismatch(String),
    #[error("{block} is active but measure {measure} is absent")]
    MissingMeasure { block: BlockKind, measure: &'static str },
    #[error("loss scale for {0} is negative")]
    NegativeWeight(BlockKind),
    #[error("KS5 point index {index} out of range for n = {n}")]
    Ks5IndexOutOfRange { index: usize, n: usize },
    #[error("parameter set has {params} flows but measures have {measures} points")]
    ParameterSizeMismatch { params: usize, measures: usize },
    #[error("measure set has no points")]
    Empty,
}

/// The residual block families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BlockKind {
    Da0,
    Da1,
    SftA,
    SftB,
    Kc,
    Ks1,
    Ks2,
    Ks3,
    Ks4,
    Ks5,
}

impl BlockKind {
    /// Evaluation and stacking order of the residual vector.
    pub const ORDER: [BlockKind; 10] = [
        BlockKind::Da0,
        BlockKind::Da1,
        BlockKind::SftA,
        BlockKind::SftB,
        BlockKind::Kc,
        BlockKind::Ks1,
        BlockKind::Ks2,
        BlockKind::Ks3,
        BlockKind::Ks4,
        BlockKind::Ks5,
    ];
}

impl std::fmt::Display for BlockKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            BlockKind::Da0 => "DA0",
            BlockKind::Da1 => "DA1",
            BlockKind::SftA => "SFT_A",
            BlockKind::SftB => "SFT_B",
            BlockKind::Kc => "KC",
            BlockKind::Ks1 => "KS1",
            BlockKind::Ks2 => "KS2",
            BlockKind::Ks3 => "KS3",
            BlockKind::Ks4 => "KS4",
            BlockKind::Ks5 => "KS5",
        };
        f.write_str(name)
    }
}

/// All measures of one frame pair. Absent measures are `None`; presence is
/// what gates the KS priors and encodes the experiment settings.
///
/// Frame conventions (coordinate-mapping direction):
/// - `m1`: B0 → A0, `m2`: B1 → A1 (between-camera transforms),
/// - `m3`: A1 → A0, `m4`: B1 → B0 (ego-motions),
/// - `m5[i]`: absolute flow of point i expressed in B0,
/// - `m6[i]`/`m7[i]`: point i at t0 seen from A0 / B0,
/// - `m8[i]`/`m9[i]`: point i at t1 seen from A1 / B1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize + Copy + Real", deserialize = "T: Deserialize<'de> + Real"))]
pub struct MeasureSet<T> {
    pub m1: Option<Pose<T>>,
    pub m2: Option<Pose<T>>,
    pub m3: Option<Pose<T>>,
    pub m4: Option<Pose<T>>,
    pub m5: Option<Vec<FlowVector<T>>>,
    pub m6: Option<Vec<Point3<T>>>,
    pub m7: Option<Vec<Point3<T>>>,
    pub m8: Option<Vec<Point3<T>>>,
    pub m9: Option<Vec<Point3<T>>>,
}

impl<T: Real> MeasureSet<T> {
    pub fn empty() -> Self {
        MeasureSet {
            m1: None,
            m2: None,
            m3: None,
            m4: None,
            m5: None,
            m6: None,
            m7: None,
            m8: None,
            m9: None,
        }
    }

    /// Number of points shared by the present per-point arrays.
    pub fn n_points(&self) -> Result<usize, ProblemError> {
        let mut n: Option<usize> = None;
        let mut check = |len: usize, name: &str| {
            match n {
                None => n = Some(len),
                Some(prev) if prev != len => {
                    return Err(ProblemError::LengthMismatch(format!(
                        "{name} has {len} entries, earlier arrays have {prev}"
                    )))
                }
                _ => {}
            }
            Ok(())
        };
        if let Some(v) = &self.m5 {
            check(v.len(), "m5")?;
        }
        if let Some(v) = &self.m6 {
            check(v.len(), "m6")?;
        }
        if let Some(v) = &self.m7 {
            check(v.len(), "m7")?;
        }
        if let Some(v) = &self.m8 {
            check(v.len(), "m8")?;
        }
        if let Some(v) = &self.m9 {
            check(v.len(), "m9")?;
        }
        n.filter(|&n| n > 0).ok_or(ProblemError::Empty)
    }

    /// Keep only the listed measures; used to encode experiment settings.
    pub fn restricted(&self, keep: &[&str]) -> MeasureSet<T> {
        let mut out = self.clone();
        if !keep.contains(&"m1") {
            out.m1 = None;
        }
        if !keep.contains(&"m2") {
            out.m2 = None;
        }
        if !keep.contains(&"m3") {
            out.m3 = None;
        }
        if !keep.contains(&"m4") {
            out.m4 = None;
        }
        if !keep.contains(&"m5") {
            out.m5 = None;
        }
        if !keep.contains(&"m6") {
            out.m6 = None;
        }
        if !keep.contains(&"m7") {
            out.m7 = None;
        }
        if !keep.contains(&"m8") {
            out.m8 = None;
        }
        if !keep.contains(&"m9") {
            out.m9 = None;
        }
        out
    }

    pub fn map<U: Real>(&self, f: impl Fn(T) -> U + Copy) -> MeasureSet<U> {
        MeasureSet {
            m1: self.m1.as_ref().map(|p| p.map(f)),
            m2: self.m2.as_ref().map(|p| p.map(f)),
            m3: self.m3.as_ref().map(|p| p.map(f)),
            m4: self.m4.as_ref().map(|p| p.map(f)),
            m5: self
                .m5
                .as_ref()
                .map(|v| v.iter().map(|x| x.map(f)).collect()),
            m6: self
                .m6
                .as_ref()
                .map(|v| v.iter().map(|x| x.map(f)).collect()),
            m7: self
                .m7
                .as_ref()
                .map(|v| v.iter().map(|x| x.map(f)).collect()),
            m8: self
                .m8
                .as_ref()
                .map(|v| v.iter().map(|x| x.map(f)).collect()),
            m9: self
                .m9
                .as_ref()
                .map(|v| v.iter().map(|x| x.map(f)).collect()),
        }
    }
}

/// Which parameters are held constant during a solve. Fixed parameters
/// contribute no tangent columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedParams {
    pub x1: bool,
    pub x2: bool,
    pub x3: bool,
    pub x4: bool,
    /// Per-point flow flags; length n.
    pub x5: Vec<bool>,
}

impl FixedParams {
    pub fn none(n: usize) -> Self {
        FixedParams {
            x1: false,
            x2: false,
            x3: false,
            x4: false,
            x5: vec![false; n],
        }
    }
}

/// The optimized parameters: four poses mirroring m1–m4 and per-point
/// absolute flows mirroring m5.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize + Copy + Real", deserialize = "T: Deserialize<'de> + Real"))]
pub struct ParameterSet<T> {
    pub x1: Pose<T>,
    pub x2: Pose<T>,
    pub x3: Pose<T>,
    pub x4: Pose<T>,
    pub x5: Vec<FlowVector<T>>,
    pub fixed: FixedParams,
}

impl<T: Real> ParameterSet<T> {
    /// Frame tags of the four pose parameters.
    pub fn pose_frames() -> [FramePair; 4] {
        [
            FramePair::new(Frame::B0, Frame::A0),
            FramePair::new(Frame::B1, Frame::A1),
            FramePair::new(Frame::A1, Frame::A0),
            FramePair::new(Frame::B1, Frame::B0),
        ]
    }

    /// Default initialization: identity poses, zero flows, everything free.
    pub fn identity(n: usize) -> Self {
        let [f1, f2, f3, f4] = Self::pose_frames();
        ParameterSet {
            x1: Pose::identity(f1),
            x2: Pose::identity(f2),
            x3: Pose::identity(f3),
            x4: Pose::identity(f4),
            x5: vec![FlowVector::zero(Frame::B0); n],
            fixed: FixedParams::none(n),
        }
    }

    /// Ground-truth parameters from a complete, noise-free measure set.
    pub fn from_measures(m: &MeasureSet<T>) -> Option<Self> {
        let n = m.n_points().ok()?;
        Some(ParameterSet {
            x1: m.m1?,
            x2: m.m2?,
            x3: m.m3?,
            x4: m.m4?,
            x5: m.m5.clone()?,
            fixed: FixedParams::none(n),
        })
    }

    pub fn n_points(&self) -> usize {
        self.x5.len()
    }

    pub fn pose(&self, index: usize) -> &Pose<T> {
        match index {
            0 => &self.x1,
            1 => &self.x2,
            2 => &self.x3,
            3 => &self.x4,
            _ => panic!("pose index out of range: {index}"),
        }
    }

    pub fn pose_mut(&mut self, index: usize) -> &mut Pose<T> {
        match index {
            0 => &mut self.x1,
            1 => &mut self.x2,
            2 => &mut self.x3,
            3 => &mut self.x4,
            _ => panic!("pose index out of range: {index}"),
        }
    }

    pub fn map<U: Real>(&self, f: impl Fn(T) -> U + Copy) -> ParameterSet<U> {
        ParameterSet {
            x1: self.x1.map(f),
            x2: self.x2.map(f),
            x3: self.x3.map(f),
            x4: self.x4.map(f),
            x5: self.x5.iter().map(|x| x.map(f)).collect(),
            fixed: self.fixed.clone(),
        }
    }
}

/// Which blocks are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSet {
    pub da0: bool,
    pub da1: bool,
    pub sft_a: bool,
    pub sft_b: bool,
    pub kc: bool,
    pub ks1: bool,
    pub ks2: bool,
    pub ks3: bool,
    pub ks4: bool,
    pub ks5: bool,
}

impl BlockSet {
    pub fn none() -> Self {
        BlockSet {
            da0: false,
            da1: false,
            sft_a: false,
            sft_b: false,
            kc: false,
            ks1: false,
            ks2: false,
            ks3: false,
            ks4: false,
            ks5: false,
        }
    }

    pub fn all() -> Self {
        BlockSet {
            da0: true,
            da1: true,
            sft_a: true,
            sft_b: true,
            kc: true,
            ks1: true,
            ks2: true,
            ks3: true,
            ks4: true,
            ks5: true,
        }
    }

    pub fn contains(&self, kind: BlockKind) -> bool {
        match kind {
            BlockKind::Da0 => self.da0,
            BlockKind::Da1 => self.da1,
            BlockKind::SftA => self.sft_a,
            BlockKind::SftB => self.sft_b,
            BlockKind::Kc => self.kc,
            BlockKind::Ks1 => self.ks1,
            BlockKind::Ks2 => self.ks2,
            BlockKind::Ks3 => self.ks3,
            BlockKind::Ks4 => self.ks4,
            BlockKind::Ks5 => self.ks5,
        }
    }

    pub fn set(&mut self, kind: BlockKind, on: bool) {
        match kind {
            BlockKind::Da0 => self.da0 = on,
            BlockKind::Da1 => self.da1 = on,
            BlockKind::SftA => self.sft_a = on,
            BlockKind::SftB => self.sft_b = on,
            BlockKind::Kc => self.kc = on,
            BlockKind::Ks1 => self.ks1 = on,
            BlockKind::Ks2 => self.ks2 = on,
            BlockKind::Ks3 => self.ks3 = on,
            BlockKind::Ks4 => self.ks4 = on,
            BlockKind::Ks5 => self.ks5 = on,
        }
    }
}

/// Per-block loss scales ρ. These multiply the squared norm of each block's
/// residuals; defaults are 1.0 everywhere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockWeights {
    pub da0: f64,
    pub da1: f64,
    pub sft_a: f64,
    pub sft_b: f64,
    pub kc: f64,
    pub ks1: f64,
    pub ks2: f64,
    pub ks3: f64,
    pub ks4: f64,
    pub ks5: f64,
}

impl Default for BlockWeights {
    fn default() -> Self {
        BlockWeights {
            da0: 1.0,
            da1: 1.0,
            sft_a: 1.0,
            sft_b: 1.0,
            kc: 1.0,
            ks1: 1.0,
            ks2: 1.0,
            ks3: 1.0,
            ks4: 1.0,
            ks5: 1.0,
        }
    }
}

impl BlockWeights {
    pub fn get(&self, kind: BlockKind) -> f64 {
        match kind {
            BlockKind::Da0 => self.da0,
            BlockKind::Da1 => self.da1,
            BlockKind::SftA => self.sft_a,
            BlockKind::SftB => self.sft_b,
            BlockKind::Kc => self.kc,
            BlockKind::Ks1 => self.ks1,
            BlockKind::Ks2 => self.ks2,
            BlockKind::Ks3 => self.ks3,
            BlockKind::Ks4 => self.ks4,
            BlockKind::Ks5 => self.ks5,
        }
    }
}

/// Active blocks, their loss scales, and the subset of points with a known
/// absolute flow for KS5.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub active: BlockSet,
    pub rho: BlockWeights,
    /// Indices of the points whose `m5` participates in KS5.
    pub ks5_points: Vec<usize>,
}

impl ProblemConfig {
    /// Every block active, unit weights, KS5 over all points.
    pub fn all_blocks(n: usize) -> Self {
        ProblemConfig {
            active: BlockSet::all(),
            rho: BlockWeights::default(),
            ks5_points: (0..n).collect(),
        }
    }

    /// Activate exactly the blocks whose measures are present; KS5 covers
    /// all points when m5 is present.
    pub fn from_measures<T: Real>(measures: &MeasureSet<T>) -> Result<Self, ProblemError> {
        let n = measures.n_points()?;
        let mut active = BlockSet::none();
        active.da0 = measures.m6.is_some() && measures.m7.is_some();
        active.da1 = measures.m8.is_some() && measures.m9.is_some();
        active.sft_a = measures.m7.is_some() && measures.m8.is_some();
        active.sft_b = measures.m7.is_some() && measures.m9.is_some();
        active.kc = measures.m2.is_some();
        active.ks1 = measures.m1.is_some();
        active.ks2 = measures.m2.is_some();
        active.ks3 = measures.m3.is_some();
        active.ks4 = measures.m4.is_some();
        active.ks5 = measures.m5.is_some();
        Ok(ProblemConfig {
            active,
            rho: BlockWeights::default(),
            ks5_points: if active.ks5 { (0..n).collect() } else { vec![] },
        })
    }

    /// Check that every active block has its measures, weights are
    /// nonnegative, and the KS5 subset is in range.
    pub fn validate<T: Real>(&self, measures: &MeasureSet<T>) -> Result<(), ProblemError> {
        let n = measures.n_points()?;
        for kind in BlockKind::ORDER {
            if !self.active.contains(kind) {
                continue;
            }
            if self.rho.get(kind) < 0.0 {
                return Err(ProblemError::NegativeWeight(kind));
            }
            let missing = |name: &'static str| ProblemError::MissingMeasure {
                block: kind,
                measure: name,
            };
            match kind {
                BlockKind::Da0 => {
                    measures.m6.as_ref().ok_or(missing("m6"))?;
                    measures.m7.as_ref().ok_or(missing("m7"))?;
                }
                BlockKind::Da1 => {
                    measures.m8.as_ref().ok_or(missing("m8"))?;
                    measures.m9.as_ref().ok_or(missing("m9"))?;
                }
                BlockKind::SftA => {
                    measures.m7.as_ref().ok_or(missing("m7"))?;
                    measures.m8.as_ref().ok_or(missing("m8"))?;
                }
                BlockKind::SftB => {
                    measures.m7.as_ref().ok_or(missing("m7"))?;
                    measures.m9.as_ref().ok_or(missing("m9"))?;
                }
                BlockKind::Kc => {
                    measures.m2.as_ref().ok_or(missing("m2"))?;
                }
                BlockKind::Ks1 => {
                    measures.m1.as_ref().ok_or(missing("m1"))?;
                }
                BlockKind::Ks2 => {
                    measures.m2.as_ref().ok_or(missing("m2"))?;
                }
                BlockKind::Ks3 => {
                    measures.m3.as_ref().ok_or(missing("m3"))?;
                }
                BlockKind::Ks4 => {
                    measures.m4.as_ref().ok_or(missing("m4"))?;
                }
                BlockKind::Ks5 => {
                    measures.m5.as_ref().ok_or(missing("m5"))?;
                    for &index in &self.ks5_points {
                        if index >= n {
                            return Err(ProblemError::Ks5IndexOutOfRange { index, n });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
