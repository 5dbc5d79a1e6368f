//! JSON documents for certificates and convex representations.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::certificate::{Provenance, SosCertificate};
use crate::error::CertificateError;
use crate::poly::{format_poly, parse, MonomialBasis, Polynomial};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocumentKind {
    Certificate,
    Representation,
}

fn default_kind() -> DocumentKind {
    DocumentKind::Certificate
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateDocument {
    pub version: u32,
    #[serde(default = "default_kind")]
    pub kind: DocumentKind,
    pub n: usize,
    pub f: String,
    pub epsilon: f64,
    pub r_eps: u32,
    pub basis_order: u32,
    /// Lower triangle of the Gram matrix, row by row.
    pub gram: Vec<f64>,
    pub squares: Vec<String>,
    pub residual: f64,
    pub l1_gap: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub g: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lambda: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub x_star: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_star: Option<f64>,
}

pub fn lower_triangle(g: &DMatrix<f64>) -> Vec<f64> {
    let s = g.nrows();
    let mut out = Vec::with_capacity(s * (s + 1) / 2);
    for i in 0..s {
        for j in 0..=i {
            out.push(g[(i, j)]);
        }
    }
    out
}

pub fn from_lower_triangle(values: &[f64], s: usize) -> Result<DMatrix<f64>, CertificateError> {
    if values.len() != s * (s + 1) / 2 {
        return Err(CertificateError::Malformed(format!(
            "Gram triangle has {} entries, basis of size {s} needs {}",
            values.len(),
            s * (s + 1) / 2
        )));
    }
    let mut g = DMatrix::zeros(s, s);
    let mut it = values.iter();
    for i in 0..s {
        for j in 0..=i {
            let v = *it.next().expect("length checked");
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

impl CertificateDocument {
    pub fn from_certificate(f: &Polynomial, cert: &SosCertificate) -> Self {
        Self {
            version: FORMAT_VERSION,
            kind: DocumentKind::Certificate,
            n: cert.n,
            f: format_poly(f),
            epsilon: cert.epsilon,
            r_eps: cert.r_eps,
            basis_order: cert.basis_order(),
            gram: lower_triangle(&cert.gram),
            squares: cert.squares.iter().map(format_poly).collect(),
            residual: cert.identity_residual,
            l1_gap: cert.l1_gap,
            provenance: cert
                .provenance
                .as_ref()
                .map(|p| serde_json::to_value(p).expect("provenance serializes")),
            g: Vec::new(),
            lambda: Vec::new(),
            x_star: Vec::new(),
            f_star: None,
        }
    }

    pub fn polynomial(&self) -> Result<Polynomial, CertificateError> {
        Ok(parse(&self.f, self.n)?)
    }

    pub fn constraints(&self) -> Result<Vec<Polynomial>, CertificateError> {
        self.g.iter().map(|s| Ok(parse(s, self.n)?)).collect()
    }

    /// Rebuilds the certificate. Shape errors are reported as malformed.
    pub fn certificate(&self) -> Result<SosCertificate, CertificateError> {
        if self.version != FORMAT_VERSION {
            return Err(CertificateError::Malformed(format!("unsupported version {}", self.version)));
        }
        if self.n == 0 {
            return Err(CertificateError::Malformed("n must be positive".into()));
        }
        if self.basis_order > crate::relaxation::MAX_ORDER || self.r_eps > crate::relaxation::MAX_ORDER {
            return Err(CertificateError::Malformed("order exceeds the supported maximum".into()));
        }
        let basis = MonomialBasis::new(self.n, self.basis_order);
        let gram = from_lower_triangle(&self.gram, basis.len())?;
        if gram.iter().any(|v| !v.is_finite()) {
            return Err(CertificateError::Malformed("non-finite Gram entry".into()));
        }
        let squares = self
            .squares
            .iter()
            .map(|s| parse(s, self.n))
            .collect::<Result<Vec<_>, _>>()?;
        let provenance = match &self.provenance {
            Some(v) => serde_json::from_value::<Provenance>(v.clone()).ok(),
            None => None,
        };
        Ok(SosCertificate {
            n: self.n,
            epsilon: self.epsilon,
            r_eps: self.r_eps,
            basis,
            gram,
            squares,
            identity_residual: self.residual,
            l1_gap: self.l1_gap,
            provenance,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CertificateError> {
        serde_json::from_str(text).map_err(|e| CertificateError::Malformed(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        fs::write(path, self.to_json() + "\n")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CertificateError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| CertificateError::Malformed(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
