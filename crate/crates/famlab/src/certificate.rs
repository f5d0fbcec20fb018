//! Certificate files: the witness pair together with the instance it was
//! produced from, so verification needs no other inputs.

use serde::{Deserialize, Serialize};

use famlab_core::boolalg::Element;
use famlab_core::famlimit::{self, Certificate};
use famlab_core::rat;

use crate::config::{parse_rat, parse_rats, BuiltInstance, ConfigError, InstanceSpec};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateBody {
    pub u: Vec<u64>,
    pub r_plus: Vec<usize>,
    pub block_deviations: Vec<String>,
    pub success_averages: Vec<String>,
    pub eps: String,
    pub deltas: Vec<String>,
    pub block_masses: Vec<String>,
    pub h_star: u64,
    pub eps_star: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateFile {
    pub instance: InstanceSpec,
    pub certificate: CertificateBody,
}

impl CertificateFile {
    pub fn from_parts(instance: &InstanceSpec, cert: &Certificate) -> Self {
        CertificateFile {
            instance: instance.clone(),
            certificate: CertificateBody {
                u: cert.u.iter().copied().collect(),
                r_plus: cert.r_plus.atoms().collect(),
                block_deviations: cert.block_deviations.iter().map(rat::format).collect(),
                success_averages: cert.success_averages.iter().map(rat::format).collect(),
                eps: rat::format(&cert.eps),
                deltas: cert.deltas.iter().map(rat::format).collect(),
                block_masses: cert.block_masses.iter().map(rat::format).collect(),
                h_star: cert.h_star,
                eps_star: rat::format(&cert.eps_star),
            },
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("serializable");
        out.push('\n');
        out
    }

    /// Rebuilds the core certificate against the embedded instance.
    pub fn to_core(&self, built: &BuiltInstance) -> Result<Certificate, ConfigError> {
        let space = built.ctx.algebra().space();
        let body = &self.certificate;
        Ok(Certificate {
            u: body.u.iter().copied().collect(),
            r_plus: Element::from_atoms(space, &body.r_plus)
                .map_err(|e| ConfigError::Semantic(e.to_string()))?,
            block_deviations: parse_rats(&body.block_deviations)?,
            success_averages: parse_rats(&body.success_averages)?,
            eps: parse_rat(&body.eps)?,
            deltas: parse_rats(&body.deltas)?,
            block_masses: parse_rats(&body.block_masses)?,
            h_star: body.h_star,
            eps_star: parse_rat(&body.eps_star)?,
        })
    }

    /// Exact re-verification against the embedded instance.
    pub fn verify(&self) -> Result<bool, ConfigError> {
        let built = self.instance.build()?;
        let cert = self.to_core(&built)?;
        famlimit::verify_certificate(&built.ctx, &cert)
            .map_err(|e| ConfigError::Semantic(e.to_string()))
    }
}
