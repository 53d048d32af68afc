//! EVM bytecode similarity toolkit: decode runtime bytecode, recover
//! per-function control flow, build stable-semantic graphs, embed them with
//! a trained heterogeneous graph network, and answer top-k similarity
//! queries over an indexed corpus.

pub mod asm;
pub mod bytecode;
pub mod cfg;
pub mod dataset;
pub mod embed;
pub mod fixtures;
pub mod index;
pub mod opcode;
pub mod rng;
pub mod ssg;
pub mod synth;
pub mod word;

pub use bytecode::{disassemble, strip_metadata, Bytecode, BytecodeError, Instruction};
pub use cfg::{
    find_basic_blocks, get_cfg, get_functions, get_predecessors, BasicBlock, BuildError, Contract,
    FunctionCfg, FunctionId,
};
pub use embed::{embed_ssg, similarity, EmbeddingModel};
pub use index::VectorIndex;
pub use opcode::{classify_stable, StableCategory};
pub use ssg::{construct_scfg, extract_contract, Ssg};
pub use word::Word;
