use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Scene-graph layer. Ordering follows the hierarchy from objects up to rooms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Layer {
    Object,
    MeshPlace,
    Place,
    Room,
}

impl Layer {
    pub const ALL: [Layer; 4] = [Layer::Object, Layer::MeshPlace, Layer::Place, Layer::Room];

    /// Symbol prefix for the layer (`O`, `P`, `p`, `R`).
    pub fn prefix(self) -> char {
        match self {
            Layer::Object => 'O',
            Layer::MeshPlace => 'P',
            Layer::Place => 'p',
            Layer::Room => 'R',
        }
    }

    pub fn from_prefix(c: char) -> Option<Layer> {
        match c {
            'O' => Some(Layer::Object),
            'P' => Some(Layer::MeshPlace),
            'p' => Some(Layer::Place),
            'R' => Some(Layer::Room),
            _ => None,
        }
    }

    /// Query-language label of the layer.
    pub fn label(self) -> &'static str {
        match self {
            Layer::Object => "Object",
            Layer::MeshPlace => "MeshPlace",
            Layer::Place => "Place",
            Layer::Room => "Room",
        }
    }

    pub fn from_label(label: &str) -> Option<Layer> {
        Layer::ALL.into_iter().find(|l| l.label() == label)
    }

    /// Whether nodes of this layer carry a semantic class.
    pub fn has_class(self) -> bool {
        !matches!(self, Layer::Place)
    }

    pub(crate) fn rank(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Case-sensitive node identifier: a layer prefix followed by a decimal index.
///
/// Symbols order by layer (objects, mesh places, places, rooms) and then by
/// numeric index, so `O2 < O10 < P1 < p1 < R0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeSymbol {
    layer: Layer,
    index: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid node symbol `{text}`: {reason}")]
pub struct SymbolError {
    pub text: String,
    pub reason: &'static str,
}

impl NodeSymbol {
    pub fn new(layer: Layer, index: u64) -> Self {
        NodeSymbol { layer, index }
    }

    pub fn layer(self) -> Layer {
        self.layer
    }

    pub fn index(self) -> u64 {
        self.index
    }
}

impl FromStr for NodeSymbol {
    type Err = SymbolError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let err = |reason| SymbolError {
            text: text.to_string(),
            reason,
        };
        let mut chars = text.chars();
        let prefix = chars.next().ok_or_else(|| err("empty"))?;
        let layer = Layer::from_prefix(prefix).ok_or_else(|| err("prefix must be one of O, P, p, R"))?;
        let digits = chars.as_str();
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err("index must be a decimal number"));
        }
        // leading zeros would not survive a render round trip
        if digits.len() > 1 && digits.starts_with('0') {
            return Err(err("index has leading zeros"));
        }
        let index = digits.parse().map_err(|_| err("index out of range"))?;
        Ok(NodeSymbol { layer, index })
    }
}

impl fmt::Display for NodeSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.layer.prefix(), self.index)
    }
}

impl Serialize for NodeSymbol {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeSymbol {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}
