//! Trapped-pair spectra (placeholder during bring-up).
