//! Orientation analysis (placeholder during bring-up).
