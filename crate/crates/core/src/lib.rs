pub mod corpus;
pub mod formula;
pub mod graphs;
pub mod oracle;
pub mod reduction;
