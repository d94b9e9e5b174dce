use std::str::FromStr;

use super::{ClassifierBank, PipelineError, Result};
use crate::gcn::{TargetSet, TrainTarget};
use crate::graph::{KnowledgeGraph, NodeRole};

/// Which nodes the graph contains and which of them carry a loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossConfig {
    /// Dataset classes only; loss on seen dataset classes.
    DatasetOnly,
    /// Auxiliary classes added to the graph; loss on seen dataset classes.
    #[default]
    DatasetNodesLoss,
    /// Auxiliary classes added; a second, equally weighted loss pins them
    /// to the auxiliary classifier.
    BothNodesLoss,
}

impl LossConfig {
    pub fn includes_auxiliary(&self) -> bool {
        !matches!(self, LossConfig::DatasetOnly)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            LossConfig::DatasetOnly => "dataset-only",
            LossConfig::DatasetNodesLoss => "dataset-loss",
            LossConfig::BothNodesLoss => "both-loss",
        }
    }
}

impl FromStr for LossConfig {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "dataset-only" => Ok(LossConfig::DatasetOnly),
            "dataset-loss" => Ok(LossConfig::DatasetNodesLoss),
            "both-loss" => Ok(LossConfig::BothNodesLoss),
            other => Err(format!(
                "unknown loss config `{other}` (expected dataset-only, dataset-loss or both-loss)"
            )),
        }
    }
}

/// Class name behind an auxiliary node label (`source:class`).
fn auxiliary_class(label: &str) -> &str {
    label.split_once(':').map_or(label, |(_, c)| c)
}

/// Regression targets for `graph`. Test nodes never enter a mask.
pub fn make_targets(
    bank: &ClassifierBank,
    auxiliary_bank: Option<&ClassifierBank>,
    graph: &KnowledgeGraph,
    loss: LossConfig,
) -> Result<TrainTarget> {
    let train = graph.nodes_with_role(NodeRole::Train);
    let train_ids: Vec<&str> = train.iter().map(|&i| graph.labels()[i].as_str()).collect();
    let mut sets = vec![TargetSet {
        targets: bank.gather(&train_ids)?,
        mask: train,
        weight: 1.0,
    }];
    if loss == LossConfig::BothNodesLoss {
        let aux = graph.nodes_with_role(NodeRole::Auxiliary);
        if aux.is_empty() {
            return Err(PipelineError::InvalidConfig(
                "both-loss needs auxiliary nodes in the graph".into(),
            ));
        }
        let aux_bank = auxiliary_bank
            .ok_or_else(|| PipelineError::InvalidConfig("both-loss needs an auxiliary classifier bank".into()))?;
        if aux_bank.dim() != bank.dim() {
            return Err(PipelineError::Shape {
                what: "auxiliary bank width",
                expected: bank.dim(),
                got: aux_bank.dim(),
            });
        }
        let ids: Vec<&str> = aux.iter().map(|&i| auxiliary_class(&graph.labels()[i])).collect();
        sets.push(TargetSet {
            targets: aux_bank.gather(&ids)?,
            mask: aux,
            weight: 1.0,
        });
    }
    let target = TrainTarget { sets };
    assert_zero_shot_hygiene(graph, &target)?;
    Ok(target)
}

/// Fails if any test node appears in a loss mask.
pub fn assert_zero_shot_hygiene(graph: &KnowledgeGraph, target: &TrainTarget) -> Result<()> {
    for i in target.masked_nodes() {
        if graph.roles().get(i) == Some(&NodeRole::Test) {
            return Err(PipelineError::TestNodeInLoss(graph.labels()[i].clone()));
        }
    }
    Ok(())
}
