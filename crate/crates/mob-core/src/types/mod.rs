//! Type inference with rational-tree types and service interface checks.

pub mod infer;
pub mod term;
pub mod unify;

pub use infer::{infer_expression, infer_program, EnvKey, ProgramTyping, TypeEnv, TypeError};
pub use term::{type_equiv, Prim, TyVar, TypeTerm};
pub use unify::{unify, Substitution, TypeMismatch};

use crate::resolver::{Resolver, ServiceTypeMismatch};

/// Checks every inferred service interface against the resolver, adopting
/// it when the service is new.
pub fn check_services(
    typing: &ProgramTyping,
    resolver: &mut Resolver,
) -> Result<(), Vec<ServiceTypeMismatch>> {
    let errors: Vec<ServiceTypeMismatch> = typing
        .services
        .iter()
        .filter_map(|(s, t)| resolver.declare_or_check_service_type(s, t).err())
        .collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}
