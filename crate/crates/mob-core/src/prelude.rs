//! Library classes available to every program: `Array` and `Map` with
//! their node and iterator classes, written in Mob itself.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use crate::syntax::ast::{Definition, Program};
use crate::syntax::parse_source;

pub const PRELUDE_SOURCE: &str = include_str!("prelude.mob");

pub fn prelude() -> &'static Program {
    static PRELUDE: OnceLock<Program> = OnceLock::new();
    PRELUDE.get_or_init(|| parse_source(PRELUDE_SOURCE).expect("prelude parses"))
}

/// Adds the prelude classes the program does not define itself, placed
/// after its service and requires definitions.
pub fn with_prelude(mut program: Program) -> Program {
    let defined: BTreeSet<&str> = program.classes().map(|c| c.name.as_str()).collect();
    let extra: Vec<Definition> = prelude()
        .classes()
        .filter(|c| !defined.contains(c.name.as_str()))
        .map(|c| Definition::Class(c.clone()))
        .collect();
    let at = program
        .definitions
        .iter()
        .position(|d| matches!(d, Definition::Class(_)))
        .unwrap_or(program.definitions.len());
    program.definitions.splice(at..at, extra);
    program
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::external::SERVICE_CONSTANTS;
    use crate::syntax::check_restrictions;
    use crate::types::infer_program;

    #[test]
    fn prelude_is_well_typed() {
        let globals: Vec<&str> = SERVICE_CONSTANTS.iter().map(|(n, _)| *n).collect();
        let p = with_prelude(parse_source("exit;").unwrap());
        check_restrictions(&p, &globals).unwrap();
        infer_program(&p, &globals).unwrap();
    }

    #[test]
    fn user_classes_win() {
        let p = with_prelude(
            parse_source("service S { m } class Array(a) { m() { return (a); } } exit;").unwrap(),
        );
        let names: Vec<&str> = p.classes().map(|c| c.name.as_str()).collect();
        assert_eq!(names.iter().filter(|n| **n == "Array").count(), 1);
        assert!(matches!(p.definitions[0], Definition::Service(_)));
        assert_eq!(p.classes().last().unwrap().params, vec!["a".to_string()]);
    }
}
