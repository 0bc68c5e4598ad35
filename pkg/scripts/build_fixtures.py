"""Build and freeze the bundled flowgraph + schema fixtures.

Run from the repo root:  python scripts/build_fixtures.py
Regenerates src/flowcompile/fixtures/*.flow.json and *.schema.json after
validating every graph. The checked-in fixtures are the frozen outputs of
this script.
"""

from __future__ import annotations

import json
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from flowcompile.flowgraph import parse_procedure  # noqa: E402

FIXTURE_DIR = os.path.join(os.path.dirname(__file__), "..", "src", "flowcompile", "fixtures")


def node(nid, role, template, terminal_kind=None):
    doc = {"id": nid, "role": role, "kind": "terminal" if terminal_kind else "normal",
           "prompt_template": template}
    if terminal_kind:
        doc["terminal_kind"] = terminal_kind
    return doc


def edge(src, dst, condition=None):
    doc = {"from": src, "to": dst}
    if condition:
        doc["condition"] = condition
    return doc


def travel_graph():
    nodes = [
        node("greet_open", "agent",
             "Greet the customer warmly and ask what kind of trip they are looking to book."),
        node("user_request", "user",
             "Explain that you want to plan a {{trip_length_days}}-day trip to {{destination}} "
             "for {{group_size}} people, and mention your interest in {{interest}}."),
        node("gather_preferences", "agent",
             "Ask follow-up questions about dates, budget, and preferences. The customer's "
             "budget is around {{budget}} dollars per person; draw it out naturally."),
        node("user_details", "user",
             "Answer the agent's questions in character ({{personality}}), sharing your budget "
             "of {{budget}} dollars and any remaining preferences."),
        node("present_options", "agent",
             "Present two or three concrete itinerary options for {{destination}} that fit the "
             "stated budget and interests, with brief highlights for each."),
        node("user_choice", "user",
             "React to the presented options in character ({{personality}}): accept one, ask "
             "for alternatives, give up, or ask for a human agent."),
        node("offer_alternatives", "agent",
             "Acknowledge the feedback and ask what should change before you search again."),
        node("confirm_details", "agent",
             "Recap the chosen option with dates, price, and inclusions, and ask the customer "
             "to confirm the booking."),
        node("user_confirm", "user",
             "Confirm the booking or change your mind at the last moment, in character."),
        node("finalize_booking", "agent",
             "Finalize the booking: summarize the full itinerary and next steps."),
        node("user_thanks", "user", "Thank the agent and close out the conversation."),
        node("booked_success", "agent",
             "Confirm the completed booking, wish the customer a great trip, and say goodbye.",
             terminal_kind="success"),
        node("close_abandonment", "agent",
             "Politely close the conversation, inviting the customer to return any time.",
             terminal_kind="abandonment"),
        node("escalate_handoff", "agent",
             "Explain that a human travel specialist will take over and hand off gracefully.",
             terminal_kind="escalation"),
    ]
    edges = [
        edge("greet_open", "user_request"),
        edge("user_request", "gather_preferences"),
        edge("gather_preferences", "user_details"),
        edge("user_details", "present_options", "enough information gathered"),
        edge("user_details", "gather_preferences", "more details needed"),
        edge("present_options", "user_choice"),
        edge("user_choice", "confirm_details", "accepts an option"),
        edge("user_choice", "offer_alternatives", "asks for different options"),
        edge("user_choice", "close_abandonment", "wants to stop searching"),
        edge("user_choice", "escalate_handoff", "asks for a human agent"),
        edge("offer_alternatives", "user_details"),
        edge("confirm_details", "user_confirm"),
        edge("user_confirm", "finalize_booking", "confirms the booking"),
        edge("user_confirm", "close_abandonment", "declines at confirmation"),
        edge("finalize_booking", "user_thanks"),
        edge("user_thanks", "booked_success"),
    ]
    return {"version": "1", "start": "greet_open", "nodes": nodes, "edges": edges}


def travel_schema():
    return {"variables": [
        {"name": "destination", "kind": "categorical",
         "domain": ["Japan", "Italy", "Iceland", "Peru", "Thailand", "Morocco", "Portugal",
                    "New Zealand"]},
        {"name": "budget", "kind": "integer-range", "domain": [600, 4000]},
        {"name": "trip_length_days", "kind": "integer-range", "domain": [3, 21]},
        {"name": "group_size", "kind": "integer-range", "domain": [1, 6]},
        {"name": "interest", "kind": "categorical",
         "domain": ["water sports", "food and wine", "hiking", "museums", "festivals",
                    "wildlife"]},
        {"name": "personality", "kind": "text-pool",
         "domain": ["enthusiastic and decisive", "uncertain and needs reassurance",
                    "budget-conscious and skeptical", "vague about details",
                    "friendly but easily distracted"]},
    ]}


def zoom_graph():
    nodes = [
        node("greet_support", "agent",
             "Greet the user and ask what problem they are having with their video calls."),
        node("user_issue", "user",
             "Describe your {{issue_type}} problem on {{os_platform}} over {{connection_type}}, "
             "mentioning the error message: {{error_message}}."),
        node("audio_steps", "agent",
             "Walk the user through audio troubleshooting: microphone selection, noise "
             "suppression settings, and reducing bandwidth usage."),
        node("video_steps", "agent",
             "Walk the user through video troubleshooting: disabling HD video, checking camera "
             "drivers, and closing other camera apps."),
        node("connection_steps", "agent",
             "Walk the user through connection troubleshooting: checking the statistics panel, "
             "switching to a wired connection, and moving closer to the router."),
        node("sharing_steps", "agent",
             "Walk the user through screen-sharing troubleshooting: permissions, sharing a "
             "window instead of the full screen, and restarting the client."),
        node("user_feedback", "user",
             "Report whether the steps helped, in character ({{personality}})."),
        node("alternative_fix", "agent",
             "Offer an alternative fix for the remaining problem and ask the user to try it."),
        node("user_retry", "user",
             "Report the outcome of the alternative fix, in character ({{personality}})."),
        node("wrap_up", "agent",
             "Summarize what fixed the issue and offer a final tip to prevent it."),
        node("user_goodbye", "user", "Thank the agent and wrap up."),
        node("resolved_success", "agent",
             "Close warmly and invite the user to reach out if the issue returns.",
             terminal_kind="success"),
        node("close_unresolved", "agent",
             "Acknowledge the issue is unresolved and close politely with self-help resources.",
             terminal_kind="abandonment"),
        node("escalate_ticket", "agent",
             "Open a ticket with a specialist team and explain what happens next.",
             terminal_kind="escalation"),
    ]
    edges = [
        edge("greet_support", "user_issue"),
        edge("user_issue", "audio_steps", "audio issue"),
        edge("user_issue", "video_steps", "video issue"),
        edge("user_issue", "connection_steps", "connection issue"),
        edge("user_issue", "sharing_steps", "screen sharing issue"),
        edge("audio_steps", "user_feedback"),
        edge("video_steps", "user_feedback"),
        edge("connection_steps", "user_feedback"),
        edge("sharing_steps", "user_feedback"),
        edge("user_feedback", "wrap_up", "problem resolved"),
        edge("user_feedback", "alternative_fix", "still broken"),
        edge("user_feedback", "escalate_ticket", "needs specialist help"),
        edge("alternative_fix", "user_retry"),
        edge("user_retry", "wrap_up", "fix worked"),
        edge("user_retry", "close_unresolved", "giving up"),
        edge("user_retry", "alternative_fix", "still broken after retry"),
        edge("wrap_up", "user_goodbye"),
        edge("user_goodbye", "resolved_success"),
    ]
    return {"version": "1", "start": "greet_support", "nodes": nodes, "edges": edges}


def zoom_schema():
    return {"variables": [
        {"name": "issue_type", "kind": "categorical",
         "domain": ["audio dropping", "video freezing", "connection drops",
                    "screen sharing failure"]},
        {"name": "os_platform", "kind": "categorical",
         "domain": ["Windows 11", "macOS", "Ubuntu Linux", "iPad"]},
        {"name": "connection_type", "kind": "categorical",
         "domain": ["home WiFi", "office Ethernet", "mobile hotspot"]},
        {"name": "error_message", "kind": "text-pool",
         "domain": ["Your network bandwidth is low", "Unable to detect a camera",
                    "Error code 1132", "Screen sharing failed to start"]},
        {"name": "personality", "kind": "text-pool",
         "domain": ["patient and methodical", "rushed before a meeting",
                    "frustrated after several attempts", "non-technical and hesitant"]},
    ]}


TRACKS = ("auto", "property", "health", "liability")


def insurance_graph():
    nodes = [
        node("greet_claims", "agent",
             "Introduce yourself as a claims agent and ask what incident the caller wants to "
             "report."),
        node("user_incident", "user",
             "Describe your {{claim_type}} incident in character ({{personality}}) with "
             "{{urgency}} urgency."),
        node("verify_policy", "agent",
             "Express empathy, then ask for the policy number and the caller's full name for "
             "verification."),
        node("user_policy_info", "user",
             "Provide your name and policy number, and ask how long the process takes."),
        node("classify_claim", "agent",
             "Confirm the {{policy_tier}} tier policy and ask clarifying questions to pin down "
             "the claim type."),
        node("user_claim_type", "user",
             "Clarify that this is a {{claim_type}} claim and add one concrete detail."),
    ]
    edges = [
        edge("greet_claims", "user_incident"),
        edge("user_incident", "verify_policy"),
        edge("verify_policy", "user_policy_info"),
        edge("user_policy_info", "classify_claim"),
        edge("classify_claim", "user_claim_type"),
    ]
    for t in TRACKS:
        nodes += [
            node(f"{t}_intake", "agent",
                 f"Open the {t} claim: ask for the when, where, and parties involved."),
            node(f"user_{t}_details", "user",
                 "Give the requested incident details, staying in character "
                 "({{personality}})."),
            node(f"{t}_assess", "agent",
                 f"Assess the {t} claim details and explain the next steps of the process."),
            node(f"user_{t}_followup", "user",
                 "Ask one follow-up question about timing or coverage."),
        ]
        edges += [
            edge("user_claim_type", f"{t}_intake", f"{t} claim"),
            edge(f"{t}_intake", f"user_{t}_details"),
            edge(f"user_{t}_details", f"{t}_assess"),
            edge(f"{t}_assess", f"user_{t}_followup"),
            edge(f"user_{t}_followup", "docs_request"),
        ]
    nodes += [
        node("docs_request", "agent",
             "List the supporting documents required for this claim and how to submit them."),
        node("user_docs_submit", "user",
             "Say which documents you can provide now and which are missing."),
        node("docs_review", "agent",
             "Review the submitted documents and state whether anything is still missing."),
        node("user_docs_status", "user",
             "Respond to the document review, in character ({{personality}})."),
        node("docs_rerequest", "agent",
             "Politely re-request the missing documents with concrete guidance on each."),
        node("user_docs_resubmit", "user",
             "Provide the remaining documents or explain the delay."),
        node("coverage_assess", "agent",
             "Assess coverage for the claim under the {{policy_tier}} tier, including the "
             "{{deductible}} dollar deductible, and explain what is covered."),
        node("user_coverage_questions", "user",
             "Ask questions about what the coverage decision means for you."),
        node("exclusions_review", "agent",
             "Review policy exclusions relevant to this claim and give a clear determination."),
        node("user_exclusions_ack", "user",
             "React to the determination, in character ({{personality}})."),
        node("denial_explain", "agent",
             "Explain the denial reasons clearly and outline the appeal options."),
        node("user_denial_response", "user",
             "Respond to the denial: accept it or dispute it, given your {{urgency}} urgency."),
        node("fraud_review", "agent",
             "Explain that some details require additional verification before the claim can "
             "proceed, and describe the review process."),
        node("user_fraud_response", "user",
             "React to the verification request and ask what happens next."),
        node("settlement_prep", "agent",
             "Prepare the settlement: explain valuation, the {{deductible}} dollar deductible, "
             "and expected timelines."),
        node("user_settlement_ready", "user",
             "Confirm you are ready to hear the settlement offer."),
        node("present_offer", "agent",
             "Present a concrete settlement offer with the amount breakdown."),
        node("user_offer_response", "user",
             "Respond to the offer in character ({{personality}}): accept, counter, or "
             "withdraw."),
        node("review_counter", "agent",
             "Acknowledge the counter-offer and explain how it will be reviewed."),
        node("user_counter_wait", "user",
             "Ask how long the review takes and restate your key concern."),
        node("revised_offer", "agent",
             "Present the revised settlement offer and explain what changed."),
        node("user_revised_response", "user",
             "Respond to the revised offer: accept it or reject it."),
        node("final_position", "agent",
             "State the company's final position and the caller's remaining options."),
        node("user_final_decision", "user",
             "Decline to continue and state your final decision."),
        node("finalize_settlement", "agent",
             "Finalize the settlement: confirm amounts, payee, and required signatures."),
        node("user_settlement_ack", "user",
             "Acknowledge the settlement terms and confirm acceptance."),
        node("payment_details", "agent",
             "Collect payment routing details and explain when the payment will arrive."),
        node("user_payment_ack", "user",
             "Confirm the payment details and thank the agent."),
        node("claim_settled", "agent",
             "Confirm the claim is settled, summarize the outcome, and close warmly.",
             terminal_kind="success"),
        node("close_denied", "agent",
             "Close the denied claim respectfully and document the appeal window.",
             terminal_kind="abandonment"),
        node("close_withdrawn", "agent",
             "Close the withdrawn claim and explain how to reopen it later.",
             terminal_kind="abandonment"),
        node("escalate_adjuster", "agent",
             "Escalate to a senior adjuster and explain the contact timeline.",
             terminal_kind="escalation"),
        node("fraud_referral", "agent",
             "Refer the claim to the special investigations team and close the call.",
             terminal_kind="escalation"),
    ]
    edges += [
        edge("docs_request", "user_docs_submit"),
        edge("user_docs_submit", "docs_review"),
        edge("docs_review", "user_docs_status"),
        edge("user_docs_status", "coverage_assess", "documents complete"),
        edge("user_docs_status", "docs_rerequest", "documents incomplete"),
        edge("docs_rerequest", "user_docs_resubmit"),
        edge("user_docs_resubmit", "docs_review"),
        edge("coverage_assess", "user_coverage_questions"),
        edge("user_coverage_questions", "exclusions_review"),
        edge("exclusions_review", "user_exclusions_ack"),
        edge("user_exclusions_ack", "settlement_prep", "claim covered"),
        edge("user_exclusions_ack", "denial_explain", "claim not covered"),
        edge("user_exclusions_ack", "fraud_review", "needs additional verification"),
        edge("denial_explain", "user_denial_response"),
        edge("user_denial_response", "close_denied", "accepts the denial"),
        edge("user_denial_response", "escalate_adjuster", "disputes the denial"),
        edge("fraud_review", "user_fraud_response"),
        edge("user_fraud_response", "fraud_referral"),
        edge("settlement_prep", "user_settlement_ready"),
        edge("user_settlement_ready", "present_offer"),
        edge("present_offer", "user_offer_response"),
        edge("user_offer_response", "finalize_settlement", "accepts the offer"),
        edge("user_offer_response", "review_counter", "makes a counter-offer"),
        edge("user_offer_response", "close_withdrawn", "withdraws the claim"),
        edge("review_counter", "user_counter_wait"),
        edge("user_counter_wait", "revised_offer"),
        edge("revised_offer", "user_revised_response"),
        edge("user_revised_response", "finalize_settlement", "accepts the revised offer"),
        edge("user_revised_response", "final_position", "rejects the revised offer"),
        edge("final_position", "user_final_decision"),
        edge("user_final_decision", "close_withdrawn"),
        edge("finalize_settlement", "user_settlement_ack"),
        edge("user_settlement_ack", "payment_details"),
        edge("payment_details", "user_payment_ack"),
        edge("user_payment_ack", "claim_settled"),
    ]
    return {"version": "1", "start": "greet_claims", "nodes": nodes, "edges": edges}


def insurance_schema():
    return {"variables": [
        {"name": "claim_type", "kind": "categorical",
         "domain": ["auto", "property", "health", "liability"]},
        {"name": "policy_tier", "kind": "categorical",
         "domain": ["Basic", "Standard", "Premium"]},
        {"name": "deductible", "kind": "integer-range", "domain": [250, 2500]},
        {"name": "urgency", "kind": "categorical", "domain": ["low", "moderate", "high"]},
        {"name": "personality", "kind": "text-pool",
         "domain": ["calm and organized", "frustrated and in a hurry",
                    "anxious about the outcome", "detail-oriented and precise",
                    "distrustful of insurers"]},
    ]}


def write(name, doc):
    path = os.path.join(FIXTURE_DIR, name)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    print(f"wrote {path}")


def main():
    os.makedirs(FIXTURE_DIR, exist_ok=True)
    for domain, graph_doc, schema_doc in (
        ("travel", travel_graph(), travel_schema()),
        ("zoom", zoom_graph(), zoom_schema()),
        ("insurance", insurance_graph(), insurance_schema()),
    ):
        graph = parse_procedure(json.dumps(graph_doc))
        print(f"{domain}: {len(graph.nodes)} nodes, {len(graph.edges)} edges, "
              f"{len(graph.decision_hubs())} hubs, {len(graph.terminals())} terminals")
        write(f"{domain}.flow.json", graph_doc)
        write(f"{domain}.schema.json", schema_doc)


if __name__ == "__main__":
    main()
