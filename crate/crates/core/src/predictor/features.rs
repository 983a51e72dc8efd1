use crate::geometry::SphericalCoord;
use crate::saliency::SaliencyMap;
use crate::subtitle::TokenId;

use super::PredictorError;

/// Fused per-timestep input `(f_GTS, f_SI, f_N, C)` with `C` encoded as
/// `(sin φ, cos φ, sin θ, cos θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub saliency: Vec<f64>,
    pub indicator: bool,
    pub navigation: Vec<f64>,
    pub coord: [f64; 4],
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.saliency.len() + 1 + self.navigation.len() + 4
    }

    /// Concatenation in the order `f_GTS, f_SI, f_N, C`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend_from_slice(&self.saliency);
        v.push(if self.indicator { 1.0 } else { 0.0 });
        v.extend_from_slice(&self.navigation);
        v.extend_from_slice(&self.coord);
        v
    }

    /// Splits a fused vector back into its components.
    pub fn unfuse(v: &[f64], saliency_dim: usize, navigation_dim: usize) -> Result<Self, PredictorError> {
        let dim = saliency_dim + 1 + navigation_dim + 4;
        if v.len() != dim {
            return Err(PredictorError::Dimension {
                what: "fused feature vector",
                expected: dim,
                found: v.len(),
            });
        }
        let (sal, rest) = v.split_at(saliency_dim);
        let (ind, rest) = rest.split_at(1);
        let (nav, coord) = rest.split_at(navigation_dim);
        Ok(Self {
            saliency: sal.to_vec(),
            indicator: ind[0] != 0.0,
            navigation: nav.to_vec(),
            coord: coord.try_into().expect("four coordinate slots"),
        })
    }
}

/// Builds a [`FeatureVector`], checking component widths and that the
/// navigation feature is zero whenever no subtitle is shown.
pub fn fuse(
    saliency: &[f64],
    indicator: bool,
    navigation: &[f64],
    coord: &SphericalCoord,
    saliency_dim: usize,
    navigation_dim: usize,
) -> Result<FeatureVector, PredictorError> {
    if saliency.len() != saliency_dim {
        return Err(PredictorError::Dimension {
            what: "saliency feature",
            expected: saliency_dim,
            found: saliency.len(),
        });
    }
    if navigation.len() != navigation_dim {
        return Err(PredictorError::Dimension {
            what: "navigation feature",
            expected: navigation_dim,
            found: navigation.len(),
        });
    }
    if !indicator && navigation.iter().any(|&v| v != 0.0) {
        return Err(PredictorError::Config(
            "navigation feature must be zero when no subtitle is active".into(),
        ));
    }
    Ok(FeatureVector {
        saliency: saliency.to_vec(),
        indicator,
        navigation: navigation.to_vec(),
        coord: coord.encode(),
    })
}

/// Raw model input for one timestep, before the learned encoders run.
#[derive(Debug, Clone, Copy)]
pub struct Frame<'a> {
    pub map: &'a SaliencyMap,
    /// Whether a subtitle is shown to this viewer at this timestep.
    pub indicator: bool,
    pub tokens: &'a [TokenId],
    pub coord: SphericalCoord,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fuse_layout_and_inverse() {
        let c = SphericalCoord::new(1.0, 0.5).unwrap();
        let fv = fuse(&[0.1; 8], true, &[0.2; 4], &c, 8, 4).unwrap();
        let v = fv.to_vec();
        assert_eq!(v.len(), 17);
        assert_eq!(v[8], 1.0);
        assert_eq!(FeatureVector::unfuse(&v, 8, 4).unwrap(), fv);
        assert!(FeatureVector::unfuse(&v, 8, 3).is_err());
    }

    #[test]
    fn zero_components_leave_only_coordinates() {
        let c = SphericalCoord::new(2.0, 1.0).unwrap();
        let v = fuse(&[0.0; 3], false, &[0.0; 2], &c, 3, 2).unwrap().to_vec();
        assert!(v[..6].iter().all(|&x| x == 0.0));
        assert_eq!(&v[6..], &c.encode());
    }

    #[test]
    fn rejects_bad_components() {
        let c = SphericalCoord::new(0.0, 1.0).unwrap();
        assert!(fuse(&[0.0; 2], true, &[0.0; 2], &c, 3, 2).is_err());
        assert!(fuse(&[0.0; 3], false, &[1.0, 0.0], &c, 3, 2).is_err());
    }
}
