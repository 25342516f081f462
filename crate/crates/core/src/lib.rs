pub mod kg;
pub mod llm;
pub mod env;
pub mod orchestrator;
pub mod stubs;
pub mod harness;
