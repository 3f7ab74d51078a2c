//! Model endpoint clients, pipeline assembly from config, and the HTTP API.

pub mod assemble;
pub mod clients;
pub mod server;
