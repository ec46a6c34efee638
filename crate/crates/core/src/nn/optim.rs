use super::linalg::Real;
use super::params::{NetParams, Tensors};
use crate::error::{Error, Result};

/// Heavy-ball SGD: `v <- momentum * v + g; w <- w - lr * v`, element-wise.
///
/// Nothing is modified when any gradient element is non-finite.
pub fn sgd_momentum_update<T: Real>(
    params: &mut NetParams<T>,
    grads: &Tensors<T>,
    lr: T,
    momentum: T,
) -> Result<()> {
    if let Some((index, _)) = grads.iter().enumerate().find(|(_, g)| !g.is_finite()) {
        let mut tensor = 0;
        let mut offset = index;
        for t in grads.weights.iter().chain(&grads.biases) {
            if offset < t.len() {
                break;
            }
            offset -= t.len();
            tensor += 1;
        }
        return Err(Error::NonFiniteGradient {
            tensor,
            index: offset,
        });
    }
    let NetParams { values, velocity } = params;
    for ((w, v), g) in values.iter_mut().zip(velocity.iter_mut()).zip(grads.iter()) {
        *v = momentum * *v + *g;
        *w = *w - lr * *v;
    }
    Ok(())
}
