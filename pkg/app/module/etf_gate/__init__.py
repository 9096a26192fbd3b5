from app.module.etf_gate.anchors import AnchorFrame, FrameReport, frame_report, generate_etf
from app.module.etf_gate.gating import GateMode, GateOutput, cosine_scores, gate, gate_batch

__all__ = ["AnchorFrame", "FrameReport", "GateMode", "GateOutput", "cosine_scores", "frame_report", "gate", "gate_batch", "generate_etf"]
