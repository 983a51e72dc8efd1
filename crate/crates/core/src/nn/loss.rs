use super::tensor::{Real, Tensor};
use super::NnError;

/// Mean squared error over all elements, accumulated in `f64`, with its
/// gradient `2 (pred - target) / count`.
pub fn mse_loss<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(f64, Tensor<T>), NnError> {
    if pred.shape() != target.shape() {
        return Err(NnError::Shape {
            op: "mse_loss",
            expected: target.shape().to_vec(),
            found: pred.shape().to_vec(),
        });
    }
    let (loss, grad) = mse_slices(pred.data(), target.data());
    Ok((loss, Tensor::from_vec(pred.shape(), grad)?))
}

pub(crate) fn mse_slices<T: Real>(pred: &[T], target: &[T]) -> (f64, Vec<T>) {
    let count = pred.len().max(1) as f64;
    let mut sum = 0.0;
    let scale = T::lit(2.0 / count);
    let grad = pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let d = p - t;
            sum += d.as_f64() * d.as_f64();
            scale * d
        })
        .collect();
    (sum / count, grad)
}
