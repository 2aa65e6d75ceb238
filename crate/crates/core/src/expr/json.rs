//! Versioned JSON layout for expression instances.

use serde::{Deserialize, Serialize};

use super::instance::ExpressionInstance;
use super::ops::Operator;
use super::template::{OperatorSequence, TreeTemplate};
use crate::error::{Error, Result};

pub const EXPRESSION_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ExpressionFile {
    version: u32,
    dim: usize,
    template: String,
    ops: Vec<String>,
    /// `[alpha, beta, gamma]` per unary slot.
    params: Vec<f64>,
    readout: Readout,
}

#[derive(Debug, Serialize, Deserialize)]
struct Readout {
    w: Vec<f64>,
    b: f64,
}

impl ExpressionInstance {
    pub fn to_json(&self) -> Result<String> {
        if self.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::numerical("cannot serialize non-finite parameters"));
        }
        let off = self.readout_offset();
        let (w, b) = self.readout();
        let file = ExpressionFile {
            version: EXPRESSION_FORMAT_VERSION,
            dim: self.dim(),
            template: self.template().shape().to_string(),
            ops: self
                .sequence()
                .ops()
                .iter()
                .map(|o| o.name().to_string())
                .collect(),
            params: self.params()[..off].to_vec(),
            readout: Readout { w: w.to_vec(), b },
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn serialize(&self) -> Result<Vec<u8>> {
        self.to_json().map(String::into_bytes)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ExpressionFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if file.version != EXPRESSION_FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported expression format version {}",
                file.version
            )));
        }
        if file.readout.w.len() != file.dim {
            return Err(Error::Parse(format!(
                "readout has {} weights for dimension {}",
                file.readout.w.len(),
                file.dim
            )));
        }
        let template = TreeTemplate::from_shape(&file.template)?;
        let ops = file
            .ops
            .iter()
            .map(|s| s.parse::<Operator>())
            .collect::<Result<Vec<_>>>()?;
        let sequence =
            OperatorSequence::new(&template, ops).map_err(|e| Error::Parse(e.to_string()))?;
        let mut params = file.params;
        params.extend_from_slice(&file.readout.w);
        params.push(file.readout.b);
        ExpressionInstance::new(template, sequence, params, file.dim)
            .map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Self> {
        let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_json(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ops::{BinaryOp, UnaryOp};
    use proptest::prelude::*;

    #[test]
    fn hand_written_file_evaluates() {
        // 1.2 - x as Id(Id(x) + 0)
        let text = r#"{
            "version": 1, "dim": 1, "template": "u(b(u,u))",
            "ops": ["Id", "0", "Id", "add"],
            "params": [1, 1, 0, 1, 1, 0, 1, 1, 0],
            "readout": {"w": [-1.0], "b": 1.2}
        }"#;
        let e = ExpressionInstance::from_json(text).unwrap();
        assert!((e.value(&[1.0]) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn truncated_payload_fails_to_parse() {
        let t = TreeTemplate::new(3).unwrap();
        let seq = OperatorSequence::new(
            &t,
            vec![
                Operator::Unary(UnaryOp::Sin),
                Operator::Unary(UnaryOp::Id),
                Operator::Unary(UnaryOp::Cube),
                Operator::Binary(BinaryOp::Add),
            ],
        )
        .unwrap();
        let e = ExpressionInstance::new(t, seq, vec![0.5; 11], 1).unwrap();
        let bytes = e.serialize().unwrap();
        let cut = &bytes[..bytes.len() / 2];
        assert!(matches!(
            ExpressionInstance::deserialize(cut),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let text = r#"{"version": 2, "dim": 1, "template": "u", "ops": ["Id"],
            "params": [1, 1, 0], "readout": {"w": [1.0], "b": 0.0}}"#;
        assert!(matches!(
            ExpressionInstance::from_json(text),
            Err(Error::Parse(_))
        ));
    }

    fn unary() -> impl Strategy<Value = Operator> {
        prop::sample::select(UnaryOp::ALL.to_vec()).prop_map(Operator::Unary)
    }

    proptest! {
        #[test]
        fn round_trip_preserves_params_bitwise(
            u1 in unary(), u2 in unary(), u3 in unary(),
            b in prop::sample::select(BinaryOp::ALL.to_vec()),
            dim in 1usize..3,
            raw in prop::collection::vec(-1e3f64..1e3, 13),
        ) {
            let t = TreeTemplate::new(3).unwrap();
            let seq = OperatorSequence::new(&t, vec![u1, u2, u3, Operator::Binary(b)]).unwrap();
            let n = t.param_count(dim);
            let e = ExpressionInstance::new(t, seq, raw[..n].to_vec(), dim).unwrap();
            let back = ExpressionInstance::deserialize(&e.serialize().unwrap()).unwrap();
            prop_assert_eq!(
                back.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>(),
                e.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>()
            );
            prop_assert_eq!(back, e);
        }
    }
}
