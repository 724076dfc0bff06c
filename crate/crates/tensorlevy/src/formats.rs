//! JSON shapes for scalars, matrices, polynomials, functionals, triplets and
//! QSDE models.
//!
//! Scalars are written as `[re, im]`; a bare number is accepted on input.
//! Matrices are arrays of rows. Words are arrays of letter strings such as
//! `"x1"` or `"x12*"`, the empty array being the unit.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use tensorlevy_core::fock::{BinGrid, Triplet};
use tensorlevy_core::functional::Functional;
use tensorlevy_core::linalg::{CMatrix, CVector};
use tensorlevy_core::qsde::QsdeModel;
use tensorlevy_core::scalar::{c, Scalar};
use tensorlevy_core::{Alphabet, Letter, NCPolynomial, Word};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarJson {
    Complex([f64; 2]),
    Real(f64),
}

impl ScalarJson {
    pub fn value(self) -> Scalar {
        match self {
            ScalarJson::Complex([re, im]) => c(re, im),
            ScalarJson::Real(re) => c(re, 0.0),
        }
    }
}

impl From<Scalar> for ScalarJson {
    fn from(z: Scalar) -> Self {
        ScalarJson::Complex([z.re, z.im])
    }
}

pub type VectorJson = Vec<ScalarJson>;
pub type MatrixJson = Vec<Vec<ScalarJson>>;

pub fn vector(v: &[ScalarJson]) -> CVector {
    CVector::from_iterator(v.len(), v.iter().map(|z| z.value()))
}

pub fn matrix(rows: &[Vec<ScalarJson>], what: &str) -> Result<CMatrix, CliError> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(CliError::Config(format!("{what}: rows have different lengths")));
    }
    Ok(CMatrix::from_fn(n, m, |i, j| rows[i][j].value()))
}

pub fn matrix_json(m: &CMatrix) -> MatrixJson {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].into()).collect()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphabetKind {
    SelfAdjoint,
    MatrixUnitary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlphabetJson {
    pub kind: AlphabetKind,
    pub d: usize,
}

impl AlphabetJson {
    pub fn alphabet(self) -> Result<Alphabet, CliError> {
        if self.d == 0 || (self.kind == AlphabetKind::MatrixUnitary && self.d > 9) {
            return Err(CliError::Config(format!("unsupported alphabet size d = {}", self.d)));
        }
        Ok(match self.kind {
            AlphabetKind::SelfAdjoint => Alphabet::self_adjoint(self.d),
            AlphabetKind::MatrixUnitary => Alphabet::matrix_unitary(self.d),
        })
    }
}

impl From<Alphabet> for AlphabetJson {
    fn from(a: Alphabet) -> Self {
        match a {
            Alphabet::SelfAdjoint { d } => AlphabetJson { kind: AlphabetKind::SelfAdjoint, d },
            Alphabet::MatrixUnitary { d } => AlphabetJson { kind: AlphabetKind::MatrixUnitary, d },
        }
    }
}

pub fn parse_word(alphabet: Alphabet, letters: &[String]) -> Result<Word, CliError> {
    let letters = letters.iter().map(|l| alphabet.parse_letter(l)).collect::<Result<Vec<Letter>, _>>()?;
    Ok(Word::new(letters))
}

pub fn word_json(word: &Word) -> Vec<String> {
    word.letters().iter().map(ToString::to_string).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub word: Vec<String>,
    pub coeff: ScalarJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolynomialJson {
    pub alphabet: AlphabetJson,
    pub terms: Vec<TermJson>,
}

impl PolynomialJson {
    pub fn polynomial(&self) -> Result<NCPolynomial, CliError> {
        let alphabet = self.alphabet.alphabet()?;
        let terms = self
            .terms
            .iter()
            .map(|t| Ok((parse_word(alphabet, &t.word)?, t.coeff.value())))
            .collect::<Result<Vec<_>, CliError>>()?;
        Ok(NCPolynomial::from_terms(alphabet, terms)?)
    }
}

impl From<&NCPolynomial> for PolynomialJson {
    fn from(p: &NCPolynomial) -> Self {
        PolynomialJson {
            alphabet: p.alphabet().into(),
            terms: p.terms().map(|(w, &z)| TermJson { word: word_json(w), coeff: z.into() }).collect(),
        }
    }
}

/// Listed words carry their values; every other word up to `max_degree` is 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalJson {
    pub alphabet: AlphabetJson,
    pub max_degree: usize,
    pub terms: Vec<TermJson>,
}

impl FunctionalJson {
    pub fn functional(&self) -> Result<Functional, CliError> {
        let alphabet = self.alphabet.alphabet()?;
        let values = self
            .terms
            .iter()
            .map(|t| Ok((parse_word(alphabet, &t.word)?, t.coeff.value())))
            .collect::<Result<Vec<_>, CliError>>()?;
        Ok(Functional::from_values(alphabet, self.max_degree, values)?)
    }
}

/// Maps are keyed by letter (`"x1"`, `"x2"`, ...); missing letters get zeros.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripletJson {
    pub h: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default)]
    pub rho0: BTreeMap<String, MatrixJson>,
    #[serde(default)]
    pub eta0: BTreeMap<String, VectorJson>,
    #[serde(default)]
    pub psi0: BTreeMap<String, ScalarJson>,
}

impl TripletJson {
    pub fn triplet(&self) -> Result<Triplet, CliError> {
        let keys = self.rho0.keys().chain(self.eta0.keys()).chain(self.psi0.keys());
        let mut d = self.d.unwrap_or(0);
        let probe = Alphabet::self_adjoint(usize::from(u16::MAX));
        for key in keys.clone() {
            match probe.parse_letter(key)? {
                Letter::X(i) if self.d.is_none() => d = d.max(usize::from(i) + 1),
                _ => {}
            }
        }
        if d == 0 {
            return Err(CliError::Config("triplet: no letters given and no \"d\"".into()));
        }
        let alphabet = Alphabet::self_adjoint(d);
        for key in keys {
            alphabet.parse_letter(key)?;
        }
        let h = self.h;
        let lookup = |key: usize| format!("x{}", key + 1);
        let rho0 = (0..d)
            .map(|i| match self.rho0.get(&lookup(i)) {
                Some(m) => matrix(m, "rho0"),
                None => Ok(CMatrix::zeros(h, h)),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let eta0 = (0..d).map(|i| self.eta0.get(&lookup(i)).map_or_else(|| CVector::zeros(h), |v| vector(v))).collect();
        let psi0 = (0..d).map(|i| self.psi0.get(&lookup(i)).map_or(c(0.0, 0.0), |z| z.value())).collect();
        Ok(Triplet::new(h, rho0, eta0, psi0)?)
    }
}

impl From<&Triplet> for TripletJson {
    fn from(t: &Triplet) -> Self {
        let key = |i: usize| format!("x{}", i + 1);
        TripletJson {
            h: t.h(),
            d: Some(t.d()),
            rho0: (0..t.d()).map(|i| (key(i), matrix_json(t.rho0(i)))).collect(),
            eta0: (0..t.d()).map(|i| (key(i), t.eta0(i).iter().map(|&z| z.into()).collect())).collect(),
            psi0: (0..t.d()).map(|i| (key(i), t.psi0(i).into())).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridJson {
    pub t_max: f64,
    pub n_bins: usize,
}

impl GridJson {
    pub fn grid(self) -> Result<BinGrid, CliError> {
        Ok(BinGrid::new(self.t_max, self.n_bins)?)
    }
}

/// `L` is a `d×d` array of `h`-vectors, `W` a `dh×dh` matrix (identity when
/// absent) and `D` a hermitian `d×d` matrix (zero when absent). `cutoff` is the
/// particle cap per time bin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ModelJson {
    pub d: usize,
    pub h: usize,
    pub L: Vec<Vec<VectorJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub W: Option<MatrixJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub D: Option<MatrixJson>,
    pub grid: GridJson,
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
}

fn default_cutoff() -> usize {
    tensorlevy_core::qsde::DEFAULT_BIN_CAP
}

impl ModelJson {
    pub fn model(&self) -> Result<QsdeModel, CliError> {
        let (d, h) = (self.d, self.h);
        let l = self.L.iter().map(|row| row.iter().map(|v| vector(v)).collect()).collect();
        let w = match &self.W {
            Some(w) => matrix(w, "W")?,
            None => CMatrix::identity(d * h, d * h),
        };
        let dmat = match &self.D {
            Some(m) => matrix(m, "D")?,
            None => CMatrix::zeros(d, d),
        };
        Ok(QsdeModel::new(d, h, l, w, dmat)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tensorlevy_core::scalar::{ONE, ZERO};

    #[test]
    fn scalars_accept_numbers_and_pairs() {
        let v: Vec<ScalarJson> = serde_json::from_str("[1.5, [0, -2]]").unwrap();
        assert_eq!(v[0].value(), c(1.5, 0.0));
        assert_eq!(v[1].value(), c(0.0, -2.0));
        assert_eq!(serde_json::to_string(&ScalarJson::from(c(1.0, 2.0))).unwrap(), "[1.0,2.0]");
    }

    #[test]
    fn polynomial_round_trip() {
        let text = r#"{"alphabet": {"kind": "matrix-unitary", "d": 2},
            "terms": [{"word": ["x12", "x21*"], "coeff": [1, 0.5]}, {"word": [], "coeff": -1}]}"#;
        let json: PolynomialJson = serde_json::from_str(text).unwrap();
        let p = json.polynomial().unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.coeff(&Word::empty()), -ONE);
        let back = PolynomialJson::from(&p).polynomial().unwrap();
        assert_eq!(back, p);
        let bad: PolynomialJson = serde_json::from_str(r#"{"alphabet": {"kind": "self-adjoint", "d": 1}, "terms": [{"word": ["x2"], "coeff": 1}]}"#).unwrap();
        assert!(bad.polynomial().is_err());
    }

    #[test]
    fn functional_defaults_to_zero() {
        let text = r#"{"alphabet": {"kind": "self-adjoint", "d": 1}, "max_degree": 2, "terms": [{"word": [], "coeff": 1}]}"#;
        let f = serde_json::from_str::<FunctionalJson>(text).unwrap().functional().unwrap();
        assert_eq!(f.unit_value(), ONE);
        assert_eq!(f.value(&Word::new(vec![Letter::X(0)])).unwrap(), ZERO);
        assert!(f.value(&Word::new(vec![Letter::X(0); 3])).is_err());
    }

    #[test]
    fn triplet_infers_d_and_round_trips() {
        let text = r#"{"h": 1, "eta0": {"x2": [1]}, "psi0": {"x1": 0.5}}"#;
        let t = serde_json::from_str::<TripletJson>(text).unwrap().triplet().unwrap();
        assert_eq!((t.d(), t.h()), (2, 1));
        assert_eq!(t.psi0(0), c(0.5, 0.0));
        let back = TripletJson::from(&t).triplet().unwrap();
        assert_eq!(back, t);
        let complex_psi = r#"{"h": 1, "psi0": {"x1": [0, 1]}}"#;
        assert!(serde_json::from_str::<TripletJson>(complex_psi).unwrap().triplet().is_err());
    }

    #[test]
    fn model_defaults() {
        let text = r#"{"d": 1, "h": 1, "L": [[[1]]], "grid": {"t_max": 1, "n_bins": 4}}"#;
        let json: ModelJson = serde_json::from_str(text).unwrap();
        assert_eq!(json.cutoff, 1);
        let model = json.model().unwrap();
        assert!(model.has_trivial_scattering());
        let bad = r#"{"d": 1, "h": 1, "L": [[[1]]], "W": [[2]], "grid": {"t_max": 1, "n_bins": 4}}"#;
        assert!(serde_json::from_str::<ModelJson>(bad).unwrap().model().is_err());
    }
}
