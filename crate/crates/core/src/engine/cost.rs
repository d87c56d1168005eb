//! Static cost of an ONNX graph: parameter count and multiply-accumulates.
//!
//! MACs are counted for `Conv`, `Gemm` and `MatMul` only, so the figure is a
//! lower bound on the arithmetic of the whole graph ("macs (conv+gemm)").
//! Tensor shapes are propagated from the graph inputs through common
//! operators; a counted node whose shapes cannot be resolved contributes 0
//! and is reported in `unresolved_nodes`.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use prost::Message;
use serde::{Deserialize, Serialize};

use super::onnx_proto::{data_type, GraphProto, ModelProto, NodeProto, TensorProto};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ModelCost {
    pub parameters: u64,
    pub macs: u64,
    pub flops: u64,
    pub file_size_bytes: u64,
    pub unresolved_nodes: u64,
}

impl ModelCost {
    pub fn parameters_m(&self) -> f64 {
        self.parameters as f64 / 1e6
    }

    pub fn macs_g(&self) -> f64 {
        self.macs as f64 / 1e9
    }

    pub fn flops_g(&self) -> f64 {
        self.flops as f64 / 1e9
    }

    pub fn size_mb(&self) -> f64 {
        self.file_size_bytes as f64 / (1024.0 * 1024.0)
    }
}

pub fn estimate_model_cost(model_path: &Path) -> Result<ModelCost> {
    let bytes = fs::read(model_path).map_err(|e| Error::io(model_path, e))?;
    let mut cost = estimate_cost_from_bytes(&bytes)?;
    cost.file_size_bytes = bytes.len() as u64;
    Ok(cost)
}

/// Same as [`estimate_model_cost`] on an in-memory model; `file_size_bytes`
/// is the byte length.
pub fn estimate_cost_from_bytes(bytes: &[u8]) -> Result<ModelCost> {
    let model = ModelProto::decode(bytes).map_err(|e| Error::OnnxParse(e.to_string()))?;
    let graph = model.graph.ok_or_else(|| Error::OnnxParse("model has no graph".into()))?;
    let mut cost = graph_cost(&graph);
    cost.file_size_bytes = bytes.len() as u64;
    Ok(cost)
}

fn is_float(t: &TensorProto) -> bool {
    // FLOAT, FLOAT16, DOUBLE, BFLOAT16
    matches!(t.data_type, 1 | 10 | 11 | 16)
}

fn graph_cost(g: &GraphProto) -> ModelCost {
    let parameters = g.initializer.iter().filter(|t| is_float(t)).map(|t| t.element_count()).sum();
    let mut st = ShapeState::default();
    for t in &g.initializer {
        st.shapes.insert(t.name.clone(), t.dims.clone());
        if let Some(v) = t.int_values() {
            st.ints.insert(t.name.clone(), v);
        } else if t.element_count() <= 8 {
            if let Some(f) = t.float_values() {
                st.float_consts.insert(t.name.clone(), f);
            }
        }
    }
    for vi in g.input.iter().chain(&g.value_info).chain(&g.output) {
        if st.shapes.contains_key(&vi.name) {
            continue;
        }
        if let Some(dims) = vi.dims() {
            // a symbolic leading (batch) dimension is taken as 1
            let resolved: Option<Vec<i64>> = dims
                .iter()
                .enumerate()
                .map(|(i, d)| d.or(if i == 0 { Some(1) } else { None }))
                .collect();
            if let Some(r) = resolved {
                st.shapes.insert(vi.name.clone(), r);
            }
        }
    }
    let mut macs = 0u64;
    let mut unresolved = 0u64;
    for node in &g.node {
        st.propagate(node);
        let counted = match node.op_type.as_str() {
            "Conv" => Some(conv_macs(&st, node)),
            "Gemm" => Some(gemm_macs(&st, node)),
            "MatMul" => Some(matmul_macs(&st, node)),
            _ => None,
        };
        match counted {
            Some(Some(m)) => macs += m,
            Some(None) => unresolved += 1,
            None => {}
        }
    }
    ModelCost {
        parameters,
        macs,
        flops: 2 * macs,
        file_size_bytes: 0,
        unresolved_nodes: unresolved,
    }
}

fn prod(d: &[i64]) -> u64 {
    d.iter().map(|&v| v.max(0) as u64).product()
}

fn conv_macs(st: &ShapeState, n: &NodeProto) -> Option<u64> {
    let w = st.shape(n.input.get(1)?)?;
    let out = st.shape(n.output.first()?)?;
    if out.len() < 3 {
        return None;
    }
    Some(prod(w) * prod(&out[2..]) * out[0].max(1) as u64)
}

fn gemm_macs(st: &ShapeState, n: &NodeProto) -> Option<u64> {
    let a = st.shape(n.input.first()?)?;
    let b = st.shape(n.input.get(1)?)?;
    if a.len() != 2 || b.len() != 2 {
        return None;
    }
    let (m, k) = if n.attr_int("transA").unwrap_or(0) != 0 { (a[1], a[0]) } else { (a[0], a[1]) };
    let nn = if n.attr_int("transB").unwrap_or(0) != 0 { b[0] } else { b[1] };
    Some(prod(&[m, nn, k]))
}

fn matmul_macs(st: &ShapeState, n: &NodeProto) -> Option<u64> {
    let a = st.shape(n.input.first()?)?;
    let b = st.shape(n.input.get(1)?)?;
    let k = *a.last()?;
    let out = st.shape(n.output.first()?)?;
    // out = batch... × M × N; each output element takes K multiply-adds
    Some(prod(out) * k.max(0) as u64).filter(|_| !b.is_empty())
}

#[derive(Default)]
struct ShapeState {
    shapes: HashMap<String, Vec<i64>>,
    ints: HashMap<String, Vec<i64>>,
    float_consts: HashMap<String, Vec<f32>>,
}

fn norm_axis(axis: i64, rank: usize) -> Option<usize> {
    let a = if axis < 0 { axis + rank as i64 } else { axis };
    (0..rank as i64).contains(&a).then_some(a as usize)
}

fn broadcast(a: &[i64], b: &[i64]) -> Option<Vec<i64>> {
    let r = a.len().max(b.len());
    let mut out = vec![0; r];
    for i in 0..r {
        let x = if i + a.len() >= r { a[i + a.len() - r] } else { 1 };
        let y = if i + b.len() >= r { b[i + b.len() - r] } else { 1 };
        out[i] = match (x, y) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return None,
        };
    }
    Some(out)
}

fn window_out(len: i64, k: i64, s: i64, pb: i64, pe: i64, dil: i64, ceil: bool) -> i64 {
    let eff = dil * (k - 1) + 1;
    let num = len + pb + pe - eff;
    if ceil {
        (num + s - 1).div_euclid(s) + 1
    } else {
        num.div_euclid(s) + 1
    }
}

impl ShapeState {
    fn shape(&self, name: &str) -> Option<&Vec<i64>> {
        self.shapes.get(name)
    }

    fn input_shape(&self, n: &NodeProto, i: usize) -> Option<Vec<i64>> {
        n.input.get(i).filter(|s| !s.is_empty()).and_then(|s| self.shapes.get(s)).cloned()
    }

    fn input_ints(&self, n: &NodeProto, i: usize) -> Option<Vec<i64>> {
        n.input.get(i).filter(|s| !s.is_empty()).and_then(|s| self.ints.get(s)).cloned()
    }

    fn set(&mut self, n: &NodeProto, i: usize, shape: Vec<i64>) {
        if let Some(name) = n.output.get(i) {
            self.shapes.entry(name.clone()).or_insert(shape);
        }
    }

    fn set_ints(&mut self, n: &NodeProto, v: Vec<i64>) {
        if let Some(name) = n.output.first() {
            self.shapes.entry(name.clone()).or_insert_with(|| vec![v.len() as i64]);
            self.ints.insert(name.clone(), v);
        }
    }

    fn propagate(&mut self, n: &NodeProto) {
        if self.try_ints(n).is_some() {
            return;
        }
        let _ = self.try_shape(n);
    }

    /// Constant folding for the small integer tensors that feed `Reshape`,
    /// `Slice` and friends.
    fn try_ints(&mut self, n: &NodeProto) -> Option<()> {
        let v = match n.op_type.as_str() {
            "Constant" => {
                let t = n.attr("value")?.t.as_ref()?;
                let v = t.int_values()?;
                if let Some(name) = n.output.first() {
                    self.shapes.insert(name.clone(), t.dims.clone());
                    self.ints.insert(name.clone(), v);
                }
                return Some(());
            }
            "Shape" => {
                let s = self.input_shape(n, 0)?;
                let r = s.len() as i64;
                let clampi = |x: i64| (if x < 0 { x + r } else { x }).clamp(0, r) as usize;
                let start = clampi(n.attr_int("start").unwrap_or(0));
                let end = n.attr("end").map(|a| clampi(a.i)).unwrap_or(s.len());
                s.get(start..end.max(start))?.to_vec()
            }
            "Gather" => {
                let data = self.input_ints(n, 0)?;
                let idx = self.input_ints(n, 1)?;
                let len = data.len() as i64;
                let v: Option<Vec<i64>> = idx
                    .iter()
                    .map(|&i| data.get((if i < 0 { i + len } else { i }) as usize).copied())
                    .collect();
                let v = v?;
                let scalar = self.input_shape(n, 1).map(|s| s.is_empty()).unwrap_or(false);
                if let Some(name) = n.output.first() {
                    self.shapes.insert(name.clone(), if scalar { vec![] } else { vec![v.len() as i64] });
                    self.ints.insert(name.clone(), v);
                }
                return Some(());
            }
            "Concat" => {
                let mut out = Vec::new();
                for i in 0..n.input.len() {
                    out.extend(self.input_ints(n, i)?);
                }
                out
            }
            "Unsqueeze" | "Squeeze" | "Identity" | "Cast" | "Reshape" | "Flatten" => {
                let v = self.input_ints(n, 0)?;
                if n.op_type == "Cast" && n.attr_int("to").map(|t| t != data_type::INT64 as i64 && t != data_type::INT32 as i64) == Some(true) {
                    return None;
                }
                // shapes handled by the general pass
                if let Some(name) = n.output.first() {
                    self.ints.insert(name.clone(), v);
                }
                return None;
            }
            "Slice" => {
                let data = self.input_ints(n, 0)?;
                let (s, e) = (self.input_ints(n, 1)?, self.input_ints(n, 2)?);
                let step = self.input_ints(n, 4).and_then(|v| v.first().copied()).unwrap_or(1);
                if step != 1 {
                    return None;
                }
                let len = data.len() as i64;
                let fix = |x: i64| (if x < 0 { x + len } else { x }).clamp(0, len) as usize;
                let (a, b) = (fix(*s.first()?), fix(*e.first()?));
                data.get(a..b.max(a))?.to_vec()
            }
            "Add" | "Sub" | "Mul" | "Div" => {
                let a = self.input_ints(n, 0)?;
                let b = self.input_ints(n, 1)?;
                let len = a.len().max(b.len());
                if !(a.len() == b.len() || a.len() == 1 || b.len() == 1) {
                    return None;
                }
                let get = |v: &Vec<i64>, i: usize| if v.len() == 1 { v[0] } else { v[i] };
                let mut out = Vec::with_capacity(len);
                for i in 0..len {
                    let (x, y) = (get(&a, i), get(&b, i));
                    out.push(match n.op_type.as_str() {
                        "Add" => x + y,
                        "Sub" => x - y,
                        "Mul" => x * y,
                        _ if y != 0 => x.div_euclid(y),
                        _ => return None,
                    });
                }
                let shape = self.input_shape(n, 0).filter(|s| s.len() <= 1).unwrap_or(vec![len as i64]);
                if let Some(name) = n.output.first() {
                    self.shapes.insert(name.clone(), shape);
                    self.ints.insert(name.clone(), out);
                }
                return Some(());
            }
            _ => return None,
        };
        self.set_ints(n, v);
        Some(())
    }

    fn try_shape(&mut self, n: &NodeProto) -> Option<()> {
        let op = n.op_type.as_str();
        match op {
            "Relu" | "Sigmoid" | "Tanh" | "LeakyRelu" | "HardSwish" | "HardSigmoid" | "Silu" | "Elu" | "Selu" | "Gelu"
            | "Exp" | "Log" | "Sqrt" | "Neg" | "Abs" | "Erf" | "Floor" | "Ceil" | "Round" | "Reciprocal" | "Not"
            | "Cast" | "Identity" | "Softmax" | "LogSoftmax" | "Clip" | "Dropout" | "BatchNormalization"
            | "InstanceNormalization" | "LayerNormalization" | "Sign" | "Softplus" | "Mish" => {
                let s = self.input_shape(n, 0)?;
                self.set(n, 0, s);
            }
            "Add" | "Sub" | "Mul" | "Div" | "Pow" | "Max" | "Min" | "Equal" | "Less" | "Greater" | "And" | "Or"
            | "Mod" | "Sum" | "Mean" | "Where" | "PRelu" | "GreaterOrEqual" | "LessOrEqual" => {
                let mut s = self.input_shape(n, 0)?;
                for i in 1..n.input.len() {
                    s = broadcast(&s, &self.input_shape(n, i)?)?;
                }
                self.set(n, 0, s);
            }
            "Conv" | "MaxPool" | "AveragePool" | "LpPool" => {
                let x = self.input_shape(n, 0)?;
                if x.len() < 3 {
                    return None;
                }
                let sp = x.len() - 2;
                let (c_out, kernel) = if op == "Conv" {
                    let w = self.input_shape(n, 1)?;
                    (w[0], n.attr_ints("kernel_shape").map(|k| k.to_vec()).unwrap_or_else(|| w[2..].to_vec()))
                } else {
                    (x[1], n.attr_ints("kernel_shape")?.to_vec())
                };
                let strides = n.attr_ints("strides").map(|v| v.to_vec()).unwrap_or(vec![1; sp]);
                let dil = n.attr_ints("dilations").map(|v| v.to_vec()).unwrap_or(vec![1; sp]);
                let pads = n.attr_ints("pads").map(|v| v.to_vec()).unwrap_or(vec![0; 2 * sp]);
                let auto = n.attr_str("auto_pad").unwrap_or_default();
                let ceil = n.attr_int("ceil_mode").unwrap_or(0) != 0;
                if kernel.len() != sp || strides.len() != sp || dil.len() != sp || pads.len() != 2 * sp {
                    return None;
                }
                let mut out = vec![x[0], c_out];
                for i in 0..sp {
                    let len = x[2 + i];
                    out.push(match auto.as_str() {
                        "SAME_UPPER" | "SAME_LOWER" => (len + strides[i] - 1) / strides[i],
                        "VALID" => window_out(len, kernel[i], strides[i], 0, 0, dil[i], false),
                        _ => window_out(len, kernel[i], strides[i], pads[i], pads[sp + i], dil[i], ceil),
                    });
                }
                self.set(n, 0, out);
            }
            "ConvTranspose" => {
                let x = self.input_shape(n, 0)?;
                let w = self.input_shape(n, 1)?;
                let sp = x.len().checked_sub(2)?;
                let group = n.attr_int("group").unwrap_or(1);
                let strides = n.attr_ints("strides").map(|v| v.to_vec()).unwrap_or(vec![1; sp]);
                let dil = n.attr_ints("dilations").map(|v| v.to_vec()).unwrap_or(vec![1; sp]);
                let pads = n.attr_ints("pads").map(|v| v.to_vec()).unwrap_or(vec![0; 2 * sp]);
                let opad = n.attr_ints("output_padding").map(|v| v.to_vec()).unwrap_or(vec![0; sp]);
                if w.len() != sp + 2 || strides.len() != sp || pads.len() != 2 * sp {
                    return None;
                }
                let mut out = vec![x[0], w[1] * group];
                for i in 0..sp {
                    out.push((x[2 + i] - 1) * strides[i] - pads[i] - pads[sp + i] + dil[i] * (w[2 + i] - 1) + 1 + opad[i]);
                }
                self.set(n, 0, out);
            }
            "GlobalAveragePool" | "GlobalMaxPool" => {
                let x = self.input_shape(n, 0)?;
                let mut out = x[..2.min(x.len())].to_vec();
                out.resize(x.len(), 1);
                self.set(n, 0, out);
            }
            "Concat" => {
                let mut s = self.input_shape(n, 0)?;
                let axis = norm_axis(n.attr_int("axis")?, s.len())?;
                for i in 1..n.input.len() {
                    s[axis] += self.input_shape(n, i)?.get(axis)?;
                }
                self.set(n, 0, s);
            }
            "Split" => {
                let s = self.input_shape(n, 0)?;
                let axis = norm_axis(n.attr_int("axis").unwrap_or(0), s.len())?;
                let parts = match self.input_ints(n, 1).or_else(|| n.attr_ints("split").map(|v| v.to_vec())) {
                    Some(p) if !p.is_empty() => p,
                    _ => {
                        let k = n.output.len() as i64;
                        let each = (s[axis] + k - 1) / k;
                        (0..k).map(|i| each.min(s[axis] - i * each)).collect()
                    }
                };
                for (i, p) in parts.into_iter().enumerate() {
                    let mut o = s.clone();
                    o[axis] = p;
                    self.set(n, i, o);
                }
            }
            "Resize" | "Upsample" => {
                let x = self.input_shape(n, 0)?;
                let out = if let Some(sizes) = (op == "Resize").then(|| self.input_ints(n, 3)).flatten() {
                    sizes
                } else {
                    let idx = if op == "Resize" { 2 } else { 1 };
                    let name = n.input.get(idx)?;
                    let scales = self.float_consts.get(name)?;
                    if scales.len() != x.len() {
                        return None;
                    }
                    x.iter().zip(scales).map(|(&d, &s)| (d as f64 * s as f64).floor() as i64).collect()
                };
                self.set(n, 0, out);
            }
            "Reshape" => {
                let x = self.input_shape(n, 0)?;
                let target = self.input_ints(n, 1)?;
                let mut out: Vec<i64> = target
                    .iter()
                    .enumerate()
                    .map(|(i, &d)| if d == 0 { x.get(i).copied().unwrap_or(0) } else { d })
                    .collect();
                if let Some(p) = out.iter().position(|&d| d == -1) {
                    let known: i64 = out.iter().filter(|&&d| d != -1).product();
                    if known == 0 {
                        return None;
                    }
                    out[p] = x.iter().product::<i64>() / known;
                }
                self.set(n, 0, out);
            }
            "Flatten" => {
                let x = self.input_shape(n, 0)?;
                let axis = n.attr_int("axis").unwrap_or(1);
                let axis = if axis < 0 { axis + x.len() as i64 } else { axis } as usize;
                let a: i64 = x[..axis.min(x.len())].iter().product();
                let b: i64 = x[axis.min(x.len())..].iter().product();
                self.set(n, 0, vec![a, b]);
            }
            "Transpose" => {
                let x = self.input_shape(n, 0)?;
                let perm: Vec<i64> = n.attr_ints("perm").map(|p| p.to_vec()).unwrap_or_else(|| (0..x.len() as i64).rev().collect());
                let out: Option<Vec<i64>> = perm.iter().map(|&p| x.get(p as usize).copied()).collect();
                self.set(n, 0, out?);
            }
            "Unsqueeze" => {
                let x = self.input_shape(n, 0)?;
                let axes = self.input_ints(n, 1).or_else(|| n.attr_ints("axes").map(|v| v.to_vec()))?;
                let r = x.len() + axes.len();
                let mut axes: Vec<usize> = axes.iter().map(|&a| norm_axis(a, r)).collect::<Option<_>>()?;
                axes.sort_unstable();
                let mut out = x;
                for a in axes {
                    out.insert(a.min(out.len()), 1);
                }
                self.set(n, 0, out);
            }
            "Squeeze" => {
                let x = self.input_shape(n, 0)?;
                let out = match self.input_ints(n, 1).or_else(|| n.attr_ints("axes").map(|v| v.to_vec())) {
                    Some(axes) => {
                        let axes: Vec<usize> = axes.iter().map(|&a| norm_axis(a, x.len())).collect::<Option<_>>()?;
                        x.iter().enumerate().filter(|(i, _)| !axes.contains(i)).map(|(_, &d)| d).collect()
                    }
                    None => x.into_iter().filter(|&d| d != 1).collect(),
                };
                self.set(n, 0, out);
            }
            "Slice" => {
                let x = self.input_shape(n, 0)?;
                let starts = self.input_ints(n, 1)?;
                let ends = self.input_ints(n, 2)?;
                let axes = self.input_ints(n, 3).unwrap_or_else(|| (0..starts.len() as i64).collect());
                let steps = self.input_ints(n, 4).unwrap_or_else(|| vec![1; starts.len()]);
                let mut out = x.clone();
                for k in 0..starts.len() {
                    let a = norm_axis(*axes.get(k)?, x.len())?;
                    let d = x[a];
                    let step = *steps.get(k)?;
                    if step == 0 {
                        return None;
                    }
                    let fix = |v: i64, lo: i64, hi: i64| (if v < 0 { v + d } else { v }).clamp(lo, hi);
                    let len = if step > 0 {
                        let (s, e) = (fix(starts[k], 0, d), fix(ends[k], 0, d));
                        ((e - s).max(0) + step - 1) / step
                    } else {
                        let (s, e) = (fix(starts[k], -1, d - 1), fix(ends[k], -1, d - 1));
                        ((s - e).max(0) + (-step) - 1) / (-step)
                    };
                    out[a] = len;
                }
                self.set(n, 0, out);
            }
            "Gather" => {
                let x = self.input_shape(n, 0)?;
                let idx = self.input_shape(n, 1)?;
                let axis = norm_axis(n.attr_int("axis").unwrap_or(0), x.len())?;
                let mut out = x[..axis].to_vec();
                out.extend(idx);
                out.extend(&x[axis + 1..]);
                self.set(n, 0, out);
            }
            "MatMul" => {
                let a = self.input_shape(n, 0)?;
                let b = self.input_shape(n, 1)?;
                if a.is_empty() || b.is_empty() {
                    return None;
                }
                let (a2, b2) = (
                    if a.len() == 1 { vec![1, a[0]] } else { a.clone() },
                    if b.len() == 1 { vec![b[0], 1] } else { b.clone() },
                );
                let (ra, rb) = (a2.len(), b2.len());
                if a2[ra - 1] != b2[rb - 2] {
                    return None;
                }
                let mut out = broadcast(&a2[..ra - 2], &b2[..rb - 2])?;
                if a.len() > 1 {
                    out.push(a2[ra - 2]);
                }
                if b.len() > 1 {
                    out.push(b2[rb - 1]);
                }
                self.set(n, 0, out);
            }
            "Gemm" => {
                let a = self.input_shape(n, 0)?;
                let b = self.input_shape(n, 1)?;
                if a.len() != 2 || b.len() != 2 {
                    return None;
                }
                let m = if n.attr_int("transA").unwrap_or(0) != 0 { a[1] } else { a[0] };
                let nn = if n.attr_int("transB").unwrap_or(0) != 0 { b[0] } else { b[1] };
                self.set(n, 0, vec![m, nn]);
            }
            "ReduceMean" | "ReduceMax" | "ReduceMin" | "ReduceSum" | "ReduceProd" | "ArgMax" | "ArgMin" => {
                let x = self.input_shape(n, 0)?;
                let keep = n.attr_int("keepdims").unwrap_or(1) != 0;
                let axes = if op.starts_with("Arg") {
                    vec![n.attr_int("axis").unwrap_or(0)]
                } else {
                    self.input_ints(n, 1)
                        .or_else(|| n.attr_ints("axes").map(|v| v.to_vec()))
                        .unwrap_or_else(|| (0..x.len() as i64).collect())
                };
                let axes: Vec<usize> = axes.iter().map(|&a| norm_axis(a, x.len())).collect::<Option<_>>()?;
                let out = x
                    .iter()
                    .enumerate()
                    .filter_map(|(i, &d)| match (axes.contains(&i), keep) {
                        (false, _) => Some(d),
                        (true, true) => Some(1),
                        (true, false) => None,
                    })
                    .collect();
                self.set(n, 0, out);
            }
            "Shape" => {
                let x = self.input_shape(n, 0)?;
                self.set(n, 0, vec![x.len() as i64]);
            }
            "Constant" => {
                let t = n.attr("value")?.t.as_ref()?;
                let dims = t.dims.clone();
                if let Some(f) = t.float_values() {
                    if let Some(name) = n.output.first() {
                        self.float_consts.insert(name.clone(), f);
                    }
                }
                self.set(n, 0, dims);
            }
            _ => return None,
        }
        Some(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::onnx_proto::{single_conv_model, AttributeProto, ValueInfoProto};

    fn cost_of(m: &ModelProto) -> ModelCost {
        estimate_cost_from_bytes(&m.to_bytes()).unwrap()
    }

    #[test]
    fn single_conv_closed_form() {
        let c = cost_of(&single_conv_model(3, 16, 3, 640, 640));
        let oracle: u64 = 3 * 3 * 3 * 16 * 640 * 640;
        assert_eq!(c.macs, oracle);
        assert_eq!(c.macs, 176_947_200);
        assert_eq!(c.flops, 2 * oracle);
        assert_eq!(c.parameters, 432);
        assert_eq!(c.unresolved_nodes, 0);
    }

    #[test]
    fn no_conv_no_macs() {
        let g = GraphProto {
            node: vec![
                NodeProto::new("Sigmoid", &["x"], &["y"]),
                NodeProto::new("MaxPool", &["y"], &["z"])
                    .with_attr(AttributeProto::ints("kernel_shape", &[2, 2]))
                    .with_attr(AttributeProto::ints("strides", &[2, 2])),
            ],
            input: vec![ValueInfoProto::float_tensor("x", &[1, 3, 32, 32])],
            ..Default::default()
        };
        let c = cost_of(&ModelProto::new(g, 13));
        assert_eq!((c.macs, c.flops, c.parameters), (0, 0, 0));
    }

    #[test]
    fn shapes_flow_through_a_small_network() {
        // conv stride 2 -> relu -> conv 1x1 grouped -> flatten -> gemm
        let w1: Vec<f32> = vec![0.0; 8 * 3 * 3 * 3];
        let w2: Vec<f32> = vec![0.0; 8 * 2];
        let fc: Vec<f32> = vec![0.0; 10 * 8 * 16 * 16];
        let g = GraphProto {
            node: vec![
                NodeProto::new("Conv", &["x", "w1"], &["a"])
                    .with_attr(AttributeProto::ints("strides", &[2, 2]))
                    .with_attr(AttributeProto::ints("pads", &[1, 1, 1, 1])),
                NodeProto::new("Relu", &["a"], &["b"]),
                NodeProto::new("Conv", &["b", "w2"], &["c"]).with_attr(AttributeProto::int("group", 4)),
                NodeProto::new("Flatten", &["c"], &["d"]),
                NodeProto::new("Gemm", &["d", "fc"], &["e"]).with_attr(AttributeProto::int("transB", 1)),
            ],
            initializer: vec![
                TensorProto::float("w1", &[8, 3, 3, 3], w1),
                TensorProto::float("w2", &[8, 2, 1, 1], w2),
                TensorProto::float("fc", &[10, 8 * 16 * 16], fc),
                TensorProto::int64("unused_shape", &[2], vec![1, -1]),
            ],
            input: vec![ValueInfoProto::float_tensor("x", &[1, 3, 32, 32])],
            ..Default::default()
        };
        let c = cost_of(&ModelProto::new(g, 13));
        let conv1 = 8 * 3 * 9 * 16 * 16;
        let conv2 = 8 * 2 * 16 * 16;
        let gemm = 10 * 2048;
        assert_eq!(c.macs, conv1 + conv2 + gemm);
        assert_eq!(c.parameters, 216 + 16 + 20480);
        assert_eq!(c.unresolved_nodes, 0);
    }

    #[test]
    fn reshape_from_runtime_shape_and_matmul() {
        // x (1,4,6) -> Shape -> Gather[0] -> Concat with [-1, 3] -> Reshape -> MatMul (3,5)
        let g = GraphProto {
            node: vec![
                NodeProto::new("Shape", &["x"], &["s"]),
                NodeProto::new("Gather", &["s", "zero"], &["b"]),
                NodeProto::new("Unsqueeze", &["b", "zero1"], &["b1"]),
                NodeProto::new("Concat", &["b1", "tail"], &["target"]).with_attr(AttributeProto::int("axis", 0)),
                NodeProto::new("Reshape", &["x", "target"], &["r"]),
                NodeProto::new("MatMul", &["r", "m"], &["y"]),
            ],
            initializer: vec![
                TensorProto::int64("zero", &[], vec![0]),
                TensorProto::int64("zero1", &[1], vec![0]),
                TensorProto::int64("tail", &[2], vec![-1, 3]),
                TensorProto::float("m", &[3, 5], vec![0.0; 15]),
            ],
            input: vec![ValueInfoProto::float_tensor("x", &[1, 4, 6])],
            ..Default::default()
        };
        let c = cost_of(&ModelProto::new(g, 13));
        // r = (1, 8, 3); y = (1, 8, 5); 8·5·3 multiply-adds
        assert_eq!(c.macs, 120);
        assert_eq!(c.parameters, 15);
    }

    #[test]
    fn unresolved_conv_is_reported() {
        let g = GraphProto {
            node: vec![NodeProto::new("Conv", &["x", "w"], &["y"])],
            initializer: vec![TensorProto::float("w", &[4, 3, 3, 3], vec![0.0; 108])],
            ..Default::default()
        };
        let c = cost_of(&ModelProto::new(g, 13));
        assert_eq!((c.macs, c.unresolved_nodes), (0, 1));
    }

    #[test]
    fn garbage_is_a_parse_error() {
        assert!(matches!(estimate_cost_from_bytes(&[0xff, 0xff, 0xff]), Err(Error::OnnxParse(_))));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.onnx");
        fs::write(&p, single_conv_model(3, 16, 3, 64, 64).to_bytes()).unwrap();
        let c = estimate_model_cost(&p).unwrap();
        assert_eq!(c.file_size_bytes, fs::metadata(&p).unwrap().len());
        assert_eq!(c.macs, 3 * 9 * 16 * 64 * 64);
    }
}
