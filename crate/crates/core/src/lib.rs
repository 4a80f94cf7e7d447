//! Evaluation harness for LLM-based depression and PTSD screening over text,
//! audio and combined interview inputs.

pub mod corpus;
pub mod harness;
pub mod metrics;
pub mod modality;
pub mod parsers;
pub mod prompts;
pub mod providers;
pub mod task;
