use std::fmt;

use super::TrainError;

/// One metrics-log line, written after every epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub step: u64,
    pub epoch: usize,
    pub train_loss: f64,
    pub val_precision: Option<f64>,
    pub val_recall: Option<f64>,
    pub val_f1: Option<f64>,
}

struct Metric(Option<f64>);

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(v) => write!(f, "{v}"),
            None => f.write_str("undefined"),
        }
    }
}

impl fmt::Display for EpochRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "step={} epoch={} train_loss={} val_precision={} val_recall={} val_f1={}",
            self.step,
            self.epoch,
            self.train_loss,
            Metric(self.val_precision),
            Metric(self.val_recall),
            Metric(self.val_f1)
        )
    }
}

impl EpochRecord {
    pub fn parse(line: &str) -> Result<Self, TrainError> {
        let bad = |why: String| TrainError::Config(format!("bad metrics line `{line}`: {why}"));
        let mut fields = std::collections::BTreeMap::new();
        for part in line.split_whitespace() {
            let (k, v) = part.split_once('=').ok_or_else(|| bad(format!("`{part}` is not key=value")))?;
            fields.insert(k, v);
        }
        let get = |k: &str| fields.get(k).copied().ok_or_else(|| bad(format!("missing `{k}`")));
        let num = |k: &str| -> Result<f64, TrainError> { get(k)?.parse().map_err(|_| bad(format!("`{k}` is not a number"))) };
        let opt = |k: &str| -> Result<Option<f64>, TrainError> {
            match get(k)? {
                "undefined" => Ok(None),
                _ => num(k).map(Some),
            }
        };
        Ok(Self {
            step: get("step")?.parse().map_err(|_| bad("bad step".into()))?,
            epoch: get("epoch")?.parse().map_err(|_| bad("bad epoch".into()))?,
            train_loss: num("train_loss")?,
            val_precision: opt("val_precision")?,
            val_recall: opt("val_recall")?,
            val_f1: opt("val_f1")?,
        })
    }
}

pub fn parse_log(text: &str) -> Result<Vec<EpochRecord>, TrainError> {
    text.lines().filter(|l| !l.trim().is_empty()).map(EpochRecord::parse).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_round_trip() {
        let r = EpochRecord {
            step: 40,
            epoch: 2,
            train_loss: 0.1 + 0.2,
            val_precision: Some(0.95),
            val_recall: None,
            val_f1: Some(1.0),
        };
        let line = r.to_string();
        assert_eq!(
            line,
            "step=40 epoch=2 train_loss=0.30000000000000004 val_precision=0.95 val_recall=undefined val_f1=1"
        );
        assert_eq!(EpochRecord::parse(&line).unwrap(), r);
        assert!(EpochRecord::parse("step=1 epoch=x").is_err());
        assert_eq!(parse_log(&format!("{line}\n\n{line}\n")).unwrap().len(), 2);
    }
}
