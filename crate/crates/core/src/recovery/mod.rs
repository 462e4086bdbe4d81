//! Joint-sparse recovery over all subcarriers and the angular-delay view
//! of the recovered channel.

mod angular_delay;
mod somp;

pub use angular_delay::{
    angular_delay_transform, final_channel, inverse_angular_delay, AngularDelayGrid, DftConvention,
};
pub use somp::{reconstruct_spatial, somp, SompOptions, SparseEstimate, StopRule};
