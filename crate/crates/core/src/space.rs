//! Mixed search spaces and their normalized encoding.
//!
//! Every candidate maps to a point in `[0, 1]^encoded_dim`: continuous
//! parameters are min-max scaled, discrete parameters are embedded by
//! normalized rank and categorical parameters are one-hot encoded. The GP,
//! the genetic search and the stopping distance all work on this encoding.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ParamKind {
    Continuous { lo: f64, hi: f64 },
    Discrete { values: Vec<f64> },
    Categorical { labels: Vec<String> },
}

impl ParamKind {
    fn encoded_width(&self) -> usize {
        match self {
            ParamKind::Continuous { .. } | ParamKind::Discrete { .. } => 1,
            ParamKind::Categorical { labels } => labels.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ParamKind,
}

impl ParamSpec {
    pub fn continuous(name: impl Into<String>, lo: f64, hi: f64) -> Result<Self> {
        let name = name.into();
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::validation(
                name,
                format!("continuous bounds must be finite with lo < hi (got [{lo}, {hi}])"),
            ));
        }
        Ok(ParamSpec {
            name,
            kind: ParamKind::Continuous { lo, hi },
        })
    }

    pub fn discrete(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let spec = ParamSpec {
            name: name.into(),
            kind: ParamKind::Discrete { values },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        labels: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let spec = ParamSpec {
            name: name.into(),
            kind: ParamKind::Categorical {
                labels: labels.into_iter().map(Into::into).collect(),
            },
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::validation(&self.name, msg));
        match &self.kind {
            ParamKind::Continuous { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
                    return fail("continuous bounds must be finite with lo < hi");
                }
            }
            ParamKind::Discrete { values } => {
                if values.is_empty() {
                    return fail("discrete parameter needs at least one value");
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return fail("discrete values must be finite");
                }
                if values.windows(2).any(|w| w[0] >= w[1]) {
                    return fail("discrete values must be strictly increasing");
                }
            }
            ParamKind::Categorical { labels } => {
                if labels.is_empty() {
                    return fail("categorical parameter needs at least one label");
                }
                for (i, l) in labels.iter().enumerate() {
                    if labels[..i].contains(l) {
                        return fail(&format!("duplicate label `{l}`"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Value assigned to one parameter. Discrete parameters use `Real`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Real(f64),
    Label(String),
}

impl ParamValue {
    pub fn as_real(&self) -> Option<f64> {
        match self {
            ParamValue::Real(v) => Some(*v),
            ParamValue::Label(_) => None,
        }
    }

    pub fn as_label(&self) -> Option<&str> {
        match self {
            ParamValue::Label(l) => Some(l),
            ParamValue::Real(_) => None,
        }
    }
}

impl std::fmt::Display for ParamValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParamValue::Real(v) => write!(f, "{v}"),
            ParamValue::Label(l) => f.write_str(l),
        }
    }
}

/// A point of the search space, one value per parameter in space order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Candidate(pub Vec<ParamValue>);

impl Candidate {
    pub fn from_reals(values: &[f64]) -> Self {
        Candidate(values.iter().map(|&v| ParamValue::Real(v)).collect())
    }

    pub fn values(&self) -> &[ParamValue] {
        &self.0
    }

    /// Real value of parameter `i`; `NaN` for labels or out-of-range indices.
    pub fn real(&self, i: usize) -> f64 {
        self.0
            .get(i)
            .and_then(ParamValue::as_real)
            .unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ParamSpec>", into = "Vec<ParamSpec>")]
pub struct SearchSpace {
    params: Vec<ParamSpec>,
    encoded_dim: usize,
}

impl TryFrom<Vec<ParamSpec>> for SearchSpace {
    type Error = Error;

    fn try_from(params: Vec<ParamSpec>) -> Result<Self> {
        SearchSpace::new(params)
    }
}

impl From<SearchSpace> for Vec<ParamSpec> {
    fn from(space: SearchSpace) -> Self {
        space.params
    }
}

impl SearchSpace {
    pub fn new(params: Vec<ParamSpec>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::validation("space", "search space has no parameters"));
        }
        for (i, p) in params.iter().enumerate() {
            p.validate()?;
            if params[..i].iter().any(|q| q.name == p.name) {
                return Err(Error::validation(&p.name, "duplicate parameter name"));
            }
        }
        let encoded_dim = params.iter().map(|p| p.kind.encoded_width()).sum();
        Ok(SearchSpace {
            params,
            encoded_dim,
        })
    }

    pub fn params(&self) -> &[ParamSpec] {
        &self.params
    }

    pub fn encoded_dim(&self) -> usize {
        self.encoded_dim
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    /// Checks that `c` assigns a valid value to every parameter.
    pub fn validate(&self, c: &Candidate) -> Result<()> {
        if c.0.len() != self.params.len() {
            return Err(Error::validation(
                "candidate",
                format!("expected {} values, got {}", self.params.len(), c.0.len()),
            ));
        }
        for (p, v) in self.params.iter().zip(&c.0) {
            let ok = match (&p.kind, v) {
                (ParamKind::Continuous { lo, hi }, ParamValue::Real(x)) => {
                    x.is_finite() && *x >= *lo && *x <= *hi
                }
                (ParamKind::Discrete { values }, ParamValue::Real(x)) => values.contains(x),
                (ParamKind::Categorical { labels }, ParamValue::Label(l)) => labels.contains(l),
                _ => false,
            };
            if !ok {
                return Err(Error::validation(
                    &p.name,
                    format!("value `{v}` is outside the parameter domain"),
                ));
            }
        }
        Ok(())
    }

    pub fn encode(&self, c: &Candidate) -> Result<Vec<f64>> {
        self.validate(c)?;
        let mut out = Vec::with_capacity(self.encoded_dim);
        for (p, v) in self.params.iter().zip(&c.0) {
            match (&p.kind, v) {
                (ParamKind::Continuous { lo, hi }, ParamValue::Real(x)) => {
                    out.push(((x - lo) / (hi - lo)).clamp(0.0, 1.0));
                }
                (ParamKind::Discrete { values }, ParamValue::Real(x)) => {
                    let rank = values.iter().position(|w| w == x).unwrap_or(0);
                    out.push(if values.len() == 1 {
                        0.0
                    } else {
                        rank as f64 / (values.len() - 1) as f64
                    });
                }
                (ParamKind::Categorical { labels }, ParamValue::Label(l)) => {
                    out.extend(labels.iter().map(|m| if m == l { 1.0 } else { 0.0 }));
                }
                _ => unreachable!("validated above"),
            }
        }
        Ok(out)
    }

    pub fn decode(&self, v: &[f64]) -> Result<Candidate> {
        if v.len() != self.encoded_dim {
            return Err(Error::validation(
                "encoding",
                format!("expected length {}, got {}", self.encoded_dim, v.len()),
            ));
        }
        if let Some(bad) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::validation(
                "encoding",
                format!("entry {bad} is not finite"),
            ));
        }
        let mut values = Vec::with_capacity(self.params.len());
        let mut offset = 0;
        for p in &self.params {
            match &p.kind {
                ParamKind::Continuous { lo, hi } => {
                    let x = lo + v[offset].clamp(0.0, 1.0) * (hi - lo);
                    values.push(ParamValue::Real(x.clamp(*lo, *hi)));
                    offset += 1;
                }
                ParamKind::Discrete { values: vals } => {
                    let scaled = v[offset].clamp(0.0, 1.0) * (vals.len() - 1) as f64;
                    let lower = scaled.floor();
                    let mut rank = lower as usize;
                    // exact half-way ties stay on the lower rank
                    if scaled - lower > 0.5 {
                        rank += 1;
                    }
                    values.push(ParamValue::Real(vals[rank.min(vals.len() - 1)]));
                    offset += 1;
                }
                ParamKind::Categorical { labels } => {
                    let block = &v[offset..offset + labels.len()];
                    let mut best = 0;
                    for (i, x) in block.iter().enumerate() {
                        if *x > block[best] {
                            best = i;
                        }
                    }
                    values.push(ParamValue::Label(labels[best].clone()));
                    offset += labels.len();
                }
            }
        }
        Ok(Candidate(values))
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Candidate {
        let values = self
            .params
            .iter()
            .map(|p| match &p.kind {
                ParamKind::Continuous { lo, hi } => {
                    let u: f64 = rng.gen();
                    ParamValue::Real((lo + u * (hi - lo)).clamp(*lo, *hi))
                }
                ParamKind::Discrete { values } => {
                    ParamValue::Real(values[rng.gen_range(0..values.len())])
                }
                ParamKind::Categorical { labels } => {
                    ParamValue::Label(labels[rng.gen_range(0..labels.len())].clone())
                }
            })
            .collect();
        Candidate(values)
    }

    /// Euclidean distance between the encodings of `a` and `b`.
    pub fn distance(&self, a: &Candidate, b: &Candidate) -> Result<f64> {
        let ea = self.encode(a)?;
        let eb = self.encode(b)?;
        Ok(euclidean(&ea, &eb))
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cont() -> SearchSpace {
        SearchSpace::new(vec![ParamSpec::continuous("v", 0.0, 10.0).unwrap()]).unwrap()
    }

    fn disc() -> SearchSpace {
        SearchSpace::new(vec![
            ParamSpec::discrete("batch", vec![32.0, 64.0, 128.0]).unwrap()
        ])
        .unwrap()
    }

    fn cat() -> SearchSpace {
        SearchSpace::new(vec![
            ParamSpec::categorical("act", ["ReLU", "Tanh"]).unwrap()
        ])
        .unwrap()
    }

    fn label(s: &str) -> Candidate {
        Candidate(vec![ParamValue::Label(s.into())])
    }

    #[test]
    fn encode_examples() {
        assert_eq!(
            cont().encode(&Candidate::from_reals(&[5.0])).unwrap(),
            vec![0.5]
        );
        assert_eq!(
            disc().encode(&Candidate::from_reals(&[64.0])).unwrap(),
            vec![0.5]
        );
        assert_eq!(cat().encode(&label("Tanh")).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn decode_examples() {
        assert_eq!(
            cont().decode(&[0.5]).unwrap(),
            Candidate::from_reals(&[5.0])
        );
        assert_eq!(
            disc().decode(&[0.6]).unwrap(),
            Candidate::from_reals(&[64.0])
        );
        assert_eq!(cat().decode(&[0.7, 0.3]).unwrap(), label("ReLU"));
    }

    #[test]
    fn decode_ties() {
        // 0.25 sits half-way between ranks 0 and 1
        assert_eq!(
            disc().decode(&[0.25]).unwrap(),
            Candidate::from_reals(&[32.0])
        );
        assert_eq!(cat().decode(&[0.5, 0.5]).unwrap(), label("ReLU"));
    }

    #[test]
    fn decode_clamps_out_of_range() {
        assert_eq!(
            cont().decode(&[1.7]).unwrap(),
            Candidate::from_reals(&[10.0])
        );
        assert_eq!(
            cont().decode(&[-3.0]).unwrap(),
            Candidate::from_reals(&[0.0])
        );
    }

    #[test]
    fn decode_rejects_wrong_length_and_nan() {
        assert!(matches!(
            cat().decode(&[1.0]),
            Err(Error::Validation { .. })
        ));
        assert!(cont().decode(&[f64::NAN]).is_err());
    }

    #[test]
    fn single_value_discrete_maps_to_zero() {
        let s = SearchSpace::new(vec![ParamSpec::discrete("k", vec![3.0]).unwrap()]).unwrap();
        assert_eq!(s.encode(&Candidate::from_reals(&[3.0])).unwrap(), vec![0.0]);
        assert_eq!(s.decode(&[0.9]).unwrap(), Candidate::from_reals(&[3.0]));
    }

    #[test]
    fn mismatch_names_parameter() {
        let err = disc().encode(&Candidate::from_reals(&[50.0])).unwrap_err();
        match err {
            Error::Validation { name, .. } => assert_eq!(name, "batch"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(cont().encode(&label("x")).is_err());
        assert!(cont().encode(&Candidate::from_reals(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(ParamSpec::continuous("a", 1.0, 1.0).is_err());
        assert!(ParamSpec::continuous("a", 0.0, f64::INFINITY).is_err());
        assert!(ParamSpec::discrete("a", vec![]).is_err());
        assert!(ParamSpec::discrete("a", vec![2.0, 1.0]).is_err());
        assert!(ParamSpec::discrete("a", vec![1.0, 1.0]).is_err());
        assert!(ParamSpec::categorical("a", Vec::<String>::new()).is_err());
        assert!(ParamSpec::categorical("a", ["x", "x"]).is_err());
        let p = ParamSpec::continuous("a", 0.0, 1.0).unwrap();
        assert!(SearchSpace::new(vec![p.clone(), p]).is_err());
    }

    #[test]
    fn encoded_dim_counts_one_hot() {
        let s = SearchSpace::new(vec![
            ParamSpec::continuous("lr", 0.0, 1.0).unwrap(),
            ParamSpec::discrete("n", vec![1.0, 2.0]).unwrap(),
            ParamSpec::categorical("c", ["a", "b", "c"]).unwrap(),
        ])
        .unwrap();
        assert_eq!(s.encoded_dim(), 5);
    }

    #[test]
    fn distance_examples() {
        let s = cont();
        let a = Candidate::from_reals(&[0.0]);
        let b = Candidate::from_reals(&[10.0]);
        assert_eq!(s.distance(&a, &a).unwrap(), 0.0);
        assert_eq!(s.distance(&a, &b).unwrap(), 1.0);
        let c = SearchSpace::new(vec![ParamSpec::categorical("c", ["A", "B"]).unwrap()]).unwrap();
        assert_eq!(
            c.distance(&label("A"), &label("B")).unwrap(),
            std::f64::consts::SQRT_2
        );
    }

    #[test]
    fn singleton_categorical_sample() {
        let s = SearchSpace::new(vec![ParamSpec::categorical("c", ["only"]).unwrap()]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            assert_eq!(s.sample_uniform(&mut rng), label("only"));
        }
    }

    #[test]
    fn continuous_sample_mean() {
        let s = SearchSpace::new(vec![ParamSpec::continuous("u", 0.0, 1.0).unwrap()]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| s.sample_uniform(&mut rng).real(0))
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn discrete_sample_frequency() {
        let s = SearchSpace::new(vec![ParamSpec::discrete("d", vec![1.0, 2.0]).unwrap()]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 10_000;
        let ones = (0..n)
            .filter(|_| s.sample_uniform(&mut rng).real(0) == 1.0)
            .count();
        let freq = ones as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.03, "freq {freq}");
    }

    #[test]
    fn sampling_is_seeded() {
        let s = cont();
        let a: Vec<_> = {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            (0..10).map(|_| s.sample_uniform(&mut rng)).collect()
        };
        let b: Vec<_> = {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            (0..10).map(|_| s.sample_uniform(&mut rng)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn space_serde_round_trip() {
        let s = SearchSpace::new(vec![
            ParamSpec::continuous("lr", 0.0, 1.0).unwrap(),
            ParamSpec::categorical("c", ["a", "b"]).unwrap(),
        ])
        .unwrap();
        let cand = Candidate(vec![ParamValue::Real(0.25), ParamValue::Label("b".into())]);
        let s2: SearchSpace = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(s, s2);
        let c2: Candidate = serde_json::from_str(&serde_json::to_string(&cand).unwrap()).unwrap();
        assert_eq!(cand, c2);
    }
}
