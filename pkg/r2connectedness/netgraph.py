""" Net pairwise spillover networks and their export. """
from typing import Literal

import networkx as nx
from pydantic import BaseModel, Field, ValidationError

from r2connectedness import logger
from r2connectedness.r2conn import SPLITS, ConnectednessTable, NpdcMatrices, SpilloverIndices, \
    aggregate_indices, npdc

GRAPH_FORMATS = ("json", "dot", "graphml")

Split = Literal["overall", "contemporaneous", "lagged"]


class NetworkExportError(ValueError):
    """ A network cannot be serialized or parsed. """


class NetworkNode(BaseModel):
    label: str
    role: Literal["transmitter", "receiver"]
    net: float


class NetworkEdge(BaseModel):
    source: str
    target: str
    weight: float = Field(gt=0)
    split: Split


class SpilloverNetwork(BaseModel):
    """ Nodes with their NET role and directed edges source -> target where NPDC exceeds the threshold. """
    split: Split
    threshold: float = Field(ge=0)
    nodes: list[NetworkNode]
    edges: list[NetworkEdge]

    def to_networkx(self) -> nx.DiGraph:
        graph = nx.DiGraph(name=self.split)
        for node in self.nodes:
            graph.add_node(node.label, role=node.role, net=node.net)
        for edge in self.edges:
            graph.add_edge(edge.source, edge.target, weight=edge.weight, split=edge.split)
        return graph


_NET_FIELDS = {"overall": "net", "contemporaneous": "net_c", "lagged": "net_l"}


def build_network(pairwise: NpdcMatrices, indices: SpilloverIndices, threshold: float = 0.2,
                  split: Split = "overall") -> SpilloverNetwork:
    """ Edge i -> j iff NPDC[i, j] > threshold; a node transmits iff its NET for the split is positive. """
    if threshold < 0:
        raise NetworkExportError(f"threshold must be non-negative, got {threshold}")
    matrix = pairwise.part(split)
    net = getattr(indices, _NET_FIELDS[split])
    if net is None:
        raise NetworkExportError(f"no NET values for the {split} split")
    labels = list(pairwise.labels)
    order = sorted(range(len(labels)), key=lambda i: labels[i])

    nodes = [NetworkNode(label=labels[i], role="transmitter" if net[i] > 0 else "receiver", net=float(net[i]))
             for i in order]
    edges = [NetworkEdge(source=labels[i], target=labels[j], weight=float(matrix[i, j]), split=split)
             for i in order for j in order if i != j and matrix[i, j] > threshold]
    logger.debug(f"{split} network: {len(edges)} edges above {threshold}")
    return SpilloverNetwork(split=split, threshold=threshold, nodes=nodes, edges=edges)


def build_networks(table: ConnectednessTable, threshold: float = 0.2) -> dict:
    """ One network per available split of the table. """
    pairwise = npdc(table)
    indices = aggregate_indices(table)
    splits = SPLITS if table.has_split else ("overall",)
    return {split: build_network(pairwise, indices, threshold, split) for split in splits}


def export_graph(network: SpilloverNetwork, fmt: str = "json") -> str:
    if fmt == "json":
        return network.model_dump_json(indent=2)
    if fmt == "graphml":
        return "\n".join(nx.generate_graphml(network.to_networkx())) + "\n"
    if fmt == "dot":
        return nx.nx_pydot.to_pydot(network.to_networkx()).to_string()
    raise NetworkExportError(f"unknown graph format {fmt!r}; expected one of {GRAPH_FORMATS}")


def parse_graph_json(text: str) -> SpilloverNetwork:
    try:
        return SpilloverNetwork.model_validate_json(text)
    except ValidationError as e:
        raise NetworkExportError(f"invalid network document: {e.error_count()} problems, first: "
                                 f"{e.errors()[0]['msg']}") from e
