use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

const FORMAT_TAG: &str = "sslab-model";

/// Versioned JSON envelope around any serializable model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument<T> {
    pub format: String,
    pub version: u32,
    pub model: T,
}

impl<T: Serialize + DeserializeOwned> ModelDocument<T> {
    pub fn new(model: T) -> Self {
        ModelDocument {
            format: FORMAT_TAG.to_string(),
            version: MODEL_FORMAT_VERSION,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument<T> = serde_json::from_str(text)?;
        if doc.format != FORMAT_TAG {
            return Err(Error::InvalidArgument(format!("unknown model format {:?}", doc.format)));
        }
        if doc.version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "model version {} is not supported (expected {MODEL_FORMAT_VERSION})",
                doc.version
            )));
        }
        Ok(doc)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{FittedModel, NaiveBayesModel};

    #[test]
    fn round_trip_and_version_check() {
        let m = FittedModel::NaiveBayes(NaiveBayesModel {
            priors: vec![0.25, 0.75],
            conditionals: vec![vec![vec![0.5, 0.5], vec![0.1, 0.9]]],
        });
        let doc = ModelDocument::new(m.clone());
        let text = doc.to_json().unwrap();
        assert!(text.contains("\"version\": 1"));
        let back: ModelDocument<FittedModel> = ModelDocument::from_json(&text).unwrap();
        assert_eq!(back.model, m);
        let bumped = text.replace("\"version\": 1", "\"version\": 99");
        assert!(ModelDocument::<FittedModel>::from_json(&bumped).is_err());
    }
}
