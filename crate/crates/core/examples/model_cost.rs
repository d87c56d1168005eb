//! Static cost of an ONNX graph: parameters, multiply-accumulates and FLOPs.
//! Pass a model path, or run without arguments to measure a generated
//! single-convolution graph.

use sonodet::engine::onnx_proto::single_conv_model;
use sonodet::engine::{estimate_cost_from_bytes, estimate_model_cost};

fn main() -> sonodet::Result<()> {
    let cost = match std::env::args_os().nth(1) {
        Some(p) => estimate_model_cost(p.as_ref())?,
        None => estimate_cost_from_bytes(&single_conv_model(3, 16, 3, 640, 640).to_bytes())?,
    };
    println!(
        "size {:.2} MB  parameters {:.4} M  MADD {:.4} G  FLOPS {:.4} G  unresolved {}",
        cost.size_mb(),
        cost.parameters_m(),
        cost.macs_g(),
        cost.flops_g(),
        cost.unresolved_nodes
    );
    Ok(())
}
