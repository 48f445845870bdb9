pub mod zscale_ref;
