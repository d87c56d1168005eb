use std::path::Path;

use serde::{Deserialize, Serialize};

use super::decode::HeadLayout;
use crate::error::{Error, Result};
use crate::tensor::RawTensor;

/// Synchronous single-frame model execution.
///
/// `infer` receives a `(1, 3, S, S)` tensor and returns the detection head,
/// optionally followed by mask prototypes. One call at a time per instance.
pub trait InferenceBackend: Send {
    fn name(&self) -> &str;
    fn input_shape(&self) -> &[usize];
    fn infer(&mut self, input: &RawTensor) -> Result<Vec<RawTensor>>;
}

impl<B: InferenceBackend + ?Sized> InferenceBackend for Box<B> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn input_shape(&self) -> &[usize] {
        (**self).input_shape()
    }

    fn infer(&mut self, input: &RawTensor) -> Result<Vec<RawTensor>> {
        (**self).infer(input)
    }
}

/// Checks backend outputs against the exported-model contract: a
/// `(1, 4+C[+M], N)` head, plus `(1, M, S/4, S/4)` prototypes for
/// segmentation models.
pub fn validate_outputs(outputs: &[RawTensor], input_size: u32) -> Result<HeadLayout> {
    match outputs {
        [head] => HeadLayout::infer(head.shape(), None),
        [head, protos] => {
            let layout = HeadLayout::infer(head.shape(), Some(protos.shape()))?;
            let side = (input_size / 4) as usize;
            if protos.shape()[2..] != [side, side] {
                return Err(Error::ShapeMismatch(format!(
                    "prototype grid {:?}, expected {side}x{side} for input {input_size}",
                    &protos.shape()[2..]
                )));
            }
            Ok(layout)
        }
        _ => Err(Error::ShapeMismatch(format!("{} output tensors, expected 1 or 2", outputs.len()))),
    }
}

pub(crate) fn check_input(input: &RawTensor, expected: &[usize]) -> Result<()> {
    if input.shape() != expected {
        return Err(Error::ShapeMismatch(format!(
            "input shape {:?}, backend expects {expected:?}",
            input.shape()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Device {
    #[default]
    Cpu,
    Gpu,
}

impl std::str::FromStr for Device {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cpu" => Ok(Device::Cpu),
            "gpu" | "cuda" => Ok(Device::Gpu),
            other => Err(Error::InvalidInput(format!("unknown device `{other}`"))),
        }
    }
}

/// Loads an ONNX model for `(1, 3, input_size, input_size)` inputs. Needs
/// the `onnx` cargo feature; the pure-Rust runtime executes on CPU only.
pub fn onnx_backend(model_path: &Path, device: Device, input_size: u32) -> Result<Box<dyn InferenceBackend>> {
    if !model_path.is_file() {
        return Err(Error::ModelLoad(format!("{}: no such file", model_path.display())));
    }
    if device == Device::Gpu {
        return Err(Error::ModelLoad("GPU execution is not available in the built-in runtime".into()));
    }
    #[cfg(feature = "onnx")]
    {
        Ok(Box::new(onnx_runtime::OnnxBackend::load(model_path, input_size)?))
    }
    #[cfg(not(feature = "onnx"))]
    {
        let _ = input_size;
        Err(Error::ModelLoad("built without the `onnx` feature".into()))
    }
}

#[cfg(feature = "onnx")]
mod onnx_runtime {
    use std::path::Path;

    use tract_onnx::prelude::*;

    use super::{check_input, InferenceBackend};
    use crate::error::{Error, Result};
    use crate::tensor::RawTensor;

    pub struct OnnxBackend {
        plan: std::sync::Arc<TypedRunnableModel>,
        input_shape: Vec<usize>,
        name: String,
    }

    impl OnnxBackend {
        pub fn load(path: &Path, input_size: u32) -> Result<Self> {
            let s = input_size as usize;
            let err = |e: TractError| Error::ModelLoad(format!("{}: {e}", path.display()));
            let plan = tract_onnx::onnx()
                .model_for_path(path)
                .map_err(err)?
                .with_input_fact(0, f32::fact([1, 3, s, s]).into())
                .map_err(err)?
                .into_optimized()
                .map_err(err)?
                .into_runnable()
                .map_err(err)?;
            Ok(Self {
                plan,
                input_shape: vec![1, 3, s, s],
                name: format!("onnx:{}", path.file_name().map(|n| n.to_string_lossy()).unwrap_or_default()),
            })
        }
    }

    impl InferenceBackend for OnnxBackend {
        fn name(&self) -> &str {
            &self.name
        }

        fn input_shape(&self) -> &[usize] {
            &self.input_shape
        }

        fn infer(&mut self, input: &RawTensor) -> Result<Vec<RawTensor>> {
            check_input(input, &self.input_shape)?;
            let err = |e: TractError| Error::Backend(e.to_string());
            let t = Tensor::from_shape(input.shape(), input.data()).map_err(err)?;
            let outs = self.plan.run(tvec!(t.into())).map_err(err)?;
            outs.iter()
                .map(|o| {
                    let o = o.cast_to::<f32>().map_err(err)?;
                    let data: Vec<f32> = o.to_plain_array_view::<f32>().map_err(err)?.iter().copied().collect();
                    RawTensor::new(o.shape().to_vec(), data)
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_contract() {
        let head = RawTensor::zeros(vec![1, 5, 8400]);
        assert_eq!(validate_outputs(&[head.clone()], 640).unwrap().num_classes, 1);
        let seg = RawTensor::zeros(vec![1, 37, 8400]);
        let protos = RawTensor::zeros(vec![1, 32, 160, 160]);
        let l = validate_outputs(&[seg.clone(), protos], 640).unwrap();
        assert_eq!((l.num_classes, l.num_mask_coeffs), (1, 32));
        let wrong = RawTensor::zeros(vec![1, 32, 80, 80]);
        assert!(validate_outputs(&[seg, wrong], 640).is_err());
        assert!(validate_outputs(&[], 640).is_err());
    }

    #[test]
    fn missing_model_is_a_load_error() {
        let r = onnx_backend(Path::new("/nonexistent/model.onnx"), Device::Cpu, 640);
        assert!(matches!(r, Err(Error::ModelLoad(_))));
    }

    #[cfg(feature = "onnx")]
    #[test]
    fn single_conv_model_runs() {
        use crate::engine::onnx_proto::single_conv_model;
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("conv.onnx");
        std::fs::write(&p, single_conv_model(3, 16, 3, 64, 64).to_bytes()).unwrap();
        let mut b = onnx_backend(&p, Device::Cpu, 64).unwrap();
        let out = b.infer(&RawTensor::zeros(vec![1, 3, 64, 64])).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].shape(), &[1, 16, 64, 64]);
        assert!(b.infer(&RawTensor::zeros(vec![1, 3, 32, 32])).is_err());
    }

    #[test]
    fn devices_parse() {
        assert_eq!("CPU".parse::<Device>().unwrap(), Device::Cpu);
        assert_eq!("cuda".parse::<Device>().unwrap(), Device::Gpu);
        assert!("tpu".parse::<Device>().is_err());
    }
}
