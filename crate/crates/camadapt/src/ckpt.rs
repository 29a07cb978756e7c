//! Parameter checkpoints in the VMWT tensor container.

use std::path::Path;

use crate::data::{load_tensors, save_tensors, DataError};
use crate::nets::ParamSet;

pub fn save_params(params: &ParamSet<f32>, path: &Path) -> Result<(), DataError> {
    let tensors: Vec<(String, Vec<usize>, Vec<f32>)> = params
        .named_tensors()
        .into_iter()
        .map(|(name, dims, data)| (name, dims, data.to_vec()))
        .collect();
    save_tensors(path, &tensors)
}

pub fn load_params(path: &Path) -> Result<ParamSet<f32>, DataError> {
    let tensors = load_tensors(path)?;
    let mut params = ParamSet::<f32>::init(0);
    let expected = params.named_tensors().len();
    if tensors.len() != expected {
        return Err(DataError::DimensionMismatch {
            path: path.to_path_buf(),
            detail: format!("expected {expected} tensors, found {}", tensors.len()),
        });
    }
    for (name, dims, data) in tensors {
        let slot = find_slot(&mut params, &name).ok_or_else(|| DataError::DimensionMismatch {
            path: path.to_path_buf(),
            detail: format!("unknown tensor {name}"),
        })?;
        if slot.len() != data.len() || dims.iter().product::<usize>() != data.len() {
            return Err(DataError::DimensionMismatch {
                path: path.to_path_buf(),
                detail: format!("tensor {name}: wrong shape {dims:?}"),
            });
        }
        slot.copy_from_slice(&data);
    }
    Ok(params)
}

fn find_slot<'a>(params: &'a mut ParamSet<f32>, name: &str) -> Option<&'a mut [f32]> {
    if let Some(rest) = name.strip_prefix("ext.") {
        let i = crate::nets::encoder::TENSORS.iter().position(|t| t.0 == rest)?;
        return Some(&mut params.ext.t[i]);
    }
    if let Some(rest) = name.strip_prefix("eih.") {
        let i = crate::nets::encoder::TENSORS.iter().position(|t| t.0 == rest)?;
        return Some(&mut params.eih.t[i]);
    }
    if let Some(rest) = name.strip_prefix("pi.") {
        let i = crate::nets::policy::TENSORS.iter().position(|t| t.0 == rest)?;
        return Some(&mut params.pi.t[i]);
    }
    None
}
