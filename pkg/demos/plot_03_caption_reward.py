"""
Scoring a candidate caption
===========================

A candidate caption earns credit two ways. A solver reads it and answers the
record's question; the answer is checked against the gold value. The text is
also compared to the gold caption with ROUGE-L and BLEU-4.
"""

# %%
from decimal import Decimal

from geocaption.reward import bleu4, caption_reward, rouge_l

gold = "The figure shows points A, B and C. The length of AB is 3.00. Angle ABC measures 45 degrees."
near = "The figure shows points A, B and C. The length of AB is 3.50. Angle ABC measures 45 degrees."
print(f"rouge_l {rouge_l(near, gold):.4f}  bleu4 {bleu4(near, gold):.4f}  mixed {caption_reward(near, gold):.4f}")

# %%
# The brevity penalty matters for short candidates.
for cand in ("a b c d", "a b c d e f", "a b c d e f g h"):
    print(f"{cand!r:22s} {bleu4(cand, 'a b c d e f g h'):.4f}")

# %%
# The solver is any object with ``complete(prompt, temperature)``. The offline
# rule-based solver reads lengths off the caption.
from geocaption.llm import MockClient
from geocaption.qa import rule_based_solver
from geocaption.reward import RewardWeights, composite_reward

solver = MockClient(rule_based_solver)
question = "What is twice the length of AB?"
for cand in (gold, near):
    b = composite_reward(cand, gold, question, Decimal("6.00"), solver)
    print(f"total {b.total:.4f} reasoning {b.reasoning:.2f} caption {b.caption:.4f} answer {b.solver_answer}")

# %%
# The weights are plain numbers in [0, 1]. Setting the reasoning weight to one
# ignores the text comparison entirely.
b = composite_reward(near, gold, question, Decimal("6.00"), solver, RewardWeights(lambda_r=1.0))
print(b.total == b.reasoning)
