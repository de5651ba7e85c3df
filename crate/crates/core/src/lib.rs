pub mod automaton;
pub mod cli;
pub mod clock;
pub mod context_sa;
pub mod maintenance_model;
pub mod session_service;
pub mod task_model;
pub mod user_model;
