use serde::de::Deserializer;
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

/// Flat weight tensor. Serialized densely, or as `{"sparse": {"len", "entries"}}`
/// when most entries are zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Weights<T>(pub Vec<T>);

impl<T> Weights<T> {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }
}

impl<T> std::ops::Deref for Weights<T> {
    type Target = [T];

    fn deref(&self) -> &[T] {
        &self.0
    }
}

#[derive(Serialize, Deserialize)]
struct Sparse<T> {
    len: usize,
    entries: Vec<(usize, T)>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Repr<T> {
    Dense(Vec<T>),
    Sparse { sparse: Sparse<T> },
}

impl<T: Serialize + Clone + Default + PartialEq> Serialize for Weights<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let zero = T::default();
        let nonzero = self.0.iter().filter(|w| **w != zero).count();
        if self.0.len() >= 64 && nonzero * 4 < self.0.len() {
            let entries = self
                .0
                .iter()
                .enumerate()
                .filter(|(_, w)| **w != zero)
                .map(|(i, w)| (i, w.clone()))
                .collect();
            Repr::Sparse { sparse: Sparse { len: self.0.len(), entries } }.serialize(s)
        } else {
            self.0.serialize(s)
        }
    }
}

impl<'de, T: Deserialize<'de> + Clone + Default> Deserialize<'de> for Weights<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match Repr::<T>::deserialize(d)? {
            Repr::Dense(v) => Ok(Weights(v)),
            Repr::Sparse { sparse } => {
                let mut v = vec![T::default(); sparse.len];
                for (i, w) in sparse.entries {
                    let slot = v
                        .get_mut(i)
                        .ok_or_else(|| serde::de::Error::custom(format!("sparse index {i} ≥ length {}", sparse.len)))?;
                    *slot = w;
                }
                Ok(Weights(v))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_form_is_used_and_round_trips() {
        let mut v = vec![0i64; 100];
        v[3] = -2;
        v[97] = 5;
        let text = serde_json::to_string(&Weights(v.clone())).unwrap();
        assert!(text.contains("sparse"), "{text}");
        assert_eq!(serde_json::from_str::<Weights<i64>>(&text).unwrap().0, v);
        let dense = serde_json::to_string(&Weights(vec![1i64, 0, 2])).unwrap();
        assert_eq!(dense, "[1,0,2]");
        assert!(serde_json::from_str::<Weights<i64>>(r#"{"sparse":{"len":2,"entries":[[5,1]]}}"#).is_err());
    }
}
