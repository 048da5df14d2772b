use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::IntentError;

/// Network geometry. The default is the full per-muscle classifier; smaller
/// instances are used for gradient checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arch {
    pub input_len: usize,
    /// Filters in each of the two convolutional cells.
    pub filters: [usize; 2],
    pub kernel: usize,
    pub pool: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl Default for Arch {
    fn default() -> Self {
        Self {
            input_len: 500,
            filters: [16, 32],
            kernel: 5,
            pool: 4,
            hidden: 4,
            classes: 3,
        }
    }
}

impl Arch {
    /// Temporal length after each cell.
    pub fn cell_lengths(&self) -> [usize; 2] {
        let l1 = self.input_len / self.pool;
        [l1, l1 / self.pool]
    }

    /// Channel count entering each cell.
    pub fn cell_inputs(&self) -> [usize; 2] {
        [1, self.filters[0]]
    }

    pub fn validate(&self) -> Result<(), IntentError> {
        let [_, l2] = self.cell_lengths();
        if self.kernel % 2 == 0 || self.kernel == 0 {
            return Err(IntentError::Arch("kernel size must be odd".into()));
        }
        if self.pool == 0 || l2 == 0 {
            return Err(IntentError::Arch(format!(
                "input of {} samples vanishes after two pool-{} cells",
                self.input_len, self.pool
            )));
        }
        if self.hidden == 0 || self.classes < 2 || self.filters.contains(&0) {
            return Err(IntentError::Arch("layer widths must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], v: f64) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![v; shape.iter().product()],
        }
    }

    /// Glorot-uniform initialization.
    pub fn glorot<R: Rng + ?Sized>(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
        Self {
            shape: shape.to_vec(),
            data: (0..shape.iter().product()).map(|_| dist.sample(rng)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// 1-D convolution with "same" zero padding, weights `[out, in, kernel]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv1d {
    pub w: Tensor,
    pub b: Tensor,
}

impl Conv1d {
    fn init<R: Rng + ?Sized>(c_in: usize, c_out: usize, k: usize, rng: &mut R) -> Self {
        Self {
            w: Tensor::glorot(&[c_out, c_in, k], c_in * k, c_out * k, rng),
            b: Tensor::zeros(&[c_out]),
        }
    }

    pub fn c_out(&self) -> usize {
        self.w.shape[0]
    }

    pub fn c_in(&self) -> usize {
        self.w.shape[1]
    }

    pub fn kernel(&self) -> usize {
        self.w.shape[2]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

impl BatchNorm {
    fn new(c: usize) -> Self {
        Self {
            gamma: Tensor::filled(&[c], 1.0),
            beta: Tensor::zeros(&[c]),
            running_mean: vec![0.0; c],
            running_var: vec![1.0; c],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvCell {
    pub conv_a: Conv1d,
    pub conv_b: Conv1d,
    pub bn: BatchNorm,
}

/// Gate order along the first axis: input, forget, candidate, output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lstm {
    /// `[4·hidden, input]`
    pub w_x: Tensor,
    /// `[4·hidden, hidden]`
    pub w_h: Tensor,
    pub b: Tensor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `[classes, hidden]`
    pub w: Tensor,
    pub b: Tensor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub arch: Arch,
    pub cells: [ConvCell; 2],
    pub lstm: Lstm,
    pub dense: Dense,
}

impl ModelParams {
    pub fn init<R: Rng + ?Sized>(arch: Arch, rng: &mut R) -> Result<Self, IntentError> {
        arch.validate()?;
        let k = arch.kernel;
        let [f1, f2] = arch.filters;
        let h = arch.hidden;
        let cell = |c_in: usize, c_out: usize, rng: &mut R| ConvCell {
            conv_a: Conv1d::init(c_in, c_out, k, rng),
            conv_b: Conv1d::init(c_out, c_out, k, rng),
            bn: BatchNorm::new(c_out),
        };
        let cells = [cell(1, f1, rng), cell(f1, f2, rng)];
        let mut b = Tensor::zeros(&[4 * h]);
        b.data[h..2 * h].fill(1.0);
        let lstm = Lstm {
            w_x: Tensor::glorot(&[4 * h, f2], f2, 4 * h, rng),
            w_h: Tensor::glorot(&[4 * h, h], h, 4 * h, rng),
            b,
        };
        let dense = Dense {
            w: Tensor::glorot(&[arch.classes, h], h, arch.classes, rng),
            b: Tensor::zeros(&[arch.classes]),
        };
        Ok(Self {
            arch,
            cells,
            lstm,
            dense,
        })
    }

    /// Trainable tensors in a fixed order.
    pub fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        let [c1, c2] = &self.cells;
        vec![
            ("cell1.conv_a.w", &c1.conv_a.w),
            ("cell1.conv_a.b", &c1.conv_a.b),
            ("cell1.conv_b.w", &c1.conv_b.w),
            ("cell1.conv_b.b", &c1.conv_b.b),
            ("cell1.bn.gamma", &c1.bn.gamma),
            ("cell1.bn.beta", &c1.bn.beta),
            ("cell2.conv_a.w", &c2.conv_a.w),
            ("cell2.conv_a.b", &c2.conv_a.b),
            ("cell2.conv_b.w", &c2.conv_b.w),
            ("cell2.conv_b.b", &c2.conv_b.b),
            ("cell2.bn.gamma", &c2.bn.gamma),
            ("cell2.bn.beta", &c2.bn.beta),
            ("lstm.w_x", &self.lstm.w_x),
            ("lstm.w_h", &self.lstm.w_h),
            ("lstm.b", &self.lstm.b),
            ("dense.w", &self.dense.w),
            ("dense.b", &self.dense.b),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let [c1, c2] = &mut self.cells;
        vec![
            &mut c1.conv_a.w,
            &mut c1.conv_a.b,
            &mut c1.conv_b.w,
            &mut c1.conv_b.b,
            &mut c1.bn.gamma,
            &mut c1.bn.beta,
            &mut c2.conv_a.w,
            &mut c2.conv_a.b,
            &mut c2.conv_b.w,
            &mut c2.conv_b.b,
            &mut c2.bn.gamma,
            &mut c2.bn.beta,
            &mut self.lstm.w_x,
            &mut self.lstm.w_h,
            &mut self.lstm.b,
            &mut self.dense.w,
            &mut self.dense.b,
        ]
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// Zeroed gradient buffers matching [`ModelParams::tensors`].
    pub fn zero_grads(&self) -> Grads {
        Grads(self.tensors().iter().map(|(_, t)| vec![0.0; t.len()]).collect())
    }

    /// Structural consistency of every tensor with the architecture.
    pub fn check(&self) -> Result<(), IntentError> {
        self.arch.validate()?;
        let a = self.arch;
        let k = a.kernel;
        let h = a.hidden;
        for (i, cell) in self.cells.iter().enumerate() {
            let (c_in, c_out) = (a.cell_inputs()[i], a.filters[i]);
            let name = |s: &str| format!("cell{}.{s}", i + 1);
            expect_shape(&name("conv_a.w"), &cell.conv_a.w, &[c_out, c_in, k])?;
            expect_shape(&name("conv_a.b"), &cell.conv_a.b, &[c_out])?;
            expect_shape(&name("conv_b.w"), &cell.conv_b.w, &[c_out, c_out, k])?;
            expect_shape(&name("conv_b.b"), &cell.conv_b.b, &[c_out])?;
            expect_shape(&name("bn.gamma"), &cell.bn.gamma, &[c_out])?;
            expect_shape(&name("bn.beta"), &cell.bn.beta, &[c_out])?;
            if cell.bn.running_mean.len() != c_out || cell.bn.running_var.len() != c_out {
                return Err(IntentError::Shape {
                    layer: name("bn.running"),
                    expected: vec![c_out],
                    found: vec![cell.bn.running_mean.len()],
                });
            }
            if cell.bn.running_var.iter().any(|v| !(*v > 0.0)) {
                return Err(IntentError::Arch(format!("{}: running variance must be positive", name("bn"))));
            }
        }
        expect_shape("lstm.w_x", &self.lstm.w_x, &[4 * h, a.filters[1]])?;
        expect_shape("lstm.w_h", &self.lstm.w_h, &[4 * h, h])?;
        expect_shape("lstm.b", &self.lstm.b, &[4 * h])?;
        expect_shape("dense.w", &self.dense.w, &[a.classes, h])?;
        expect_shape("dense.b", &self.dense.b, &[a.classes])?;
        Ok(())
    }
}

fn expect_shape(layer: &str, t: &Tensor, shape: &[usize]) -> Result<(), IntentError> {
    if t.shape != shape || t.data.len() != shape.iter().product::<usize>() {
        return Err(IntentError::Shape {
            layer: layer.to_string(),
            expected: shape.to_vec(),
            found: t.shape.clone(),
        });
    }
    Ok(())
}

/// Gradients, one buffer per trainable tensor in [`ModelParams::tensors`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads(pub Vec<Vec<f64>>);

impl Grads {
    pub fn flat(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().flatten().copied()
    }
}
