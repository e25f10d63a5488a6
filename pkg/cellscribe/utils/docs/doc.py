from ...colors import foreground as fg


RESET = fg.RESET


def prep_doc(action="print"):
    doc = f"""\n\
{fg.DWHITE_FG}Example Usage:{RESET}
    {fg.LWHITE_FG}Ontology and similarity{RESET}:
        {fg.GREEN_FG}cellscribe{fg.CYAN_FG} ontology{fg.YELLOW_FG} cl.obo {fg.CYAN_FG}--prefixes{RESET} CL {fg.CYAN_FG}-O{RESET} graph  {fg.DWHITE_FG}⤗{RESET}{fg.FWHITE_FG} # edges.tsv + terms.tsv{RESET}
        {fg.GREEN_FG}cellscribe{fg.CYAN_FG} similarity{fg.YELLOW_FG} graph/edges.tsv {fg.CYAN_FG}--tau{RESET} 0.1 {fg.CYAN_FG}--report --cdf -O{RESET} sim  {fg.DWHITE_FG}⤗{RESET}{fg.FWHITE_FG} # similarity.ppr + stats{RESET}
    {fg.LWHITE_FG}Cohort{RESET}:
        {fg.GREEN_FG}cellscribe{fg.CYAN_FG} sample{fg.YELLOW_FG} cohort.csv {fg.CYAN_FG}--target_n{RESET} 100000 {fg.CYAN_FG}--seed{RESET} 7 {fg.CYAN_FG}-O{RESET} out  {fg.DWHITE_FG}⤗{RESET}{fg.FWHITE_FG} # Diversity-maximizing subsample{RESET}
        {fg.GREEN_FG}cellscribe{fg.CYAN_FG} split{fg.YELLOW_FG} cohort.csv {fg.CYAN_FG}--ratios{RESET} 80/10/10 {fg.CYAN_FG}--seed{RESET} 7 {fg.CYAN_FG}-O{RESET} out  {fg.DWHITE_FG}⤗{RESET}{fg.FWHITE_FG} # No donor in two splits{RESET}
    {fg.LWHITE_FG}Pathways and descriptions{RESET}:
        {fg.GREEN_FG}cellscribe{fg.CYAN_FG} pathways{fg.YELLOW_FG} matrix.mtx {fg.CYAN_FG}--gene_sets{RESET} hallmark.gmt {fg.CYAN_FG}--prevalence{RESET} 0.5% {fg.CYAN_FG}-O{RESET} out{RESET}
        {fg.GREEN_FG}cellscribe{fg.CYAN_FG} describe{fg.YELLOW_FG} cohort.csv {fg.CYAN_FG}--ontology{RESET} cl.obo {fg.CYAN_FG}--top_pathways{RESET} out/top_pathways.tsv {fg.CYAN_FG}-O{RESET} out{RESET}
        {fg.GREEN_FG}cellscribe{fg.CYAN_FG} pipeline{fg.YELLOW_FG} cohort.csv {fg.CYAN_FG}--expression{RESET} matrix.mtx {fg.CYAN_FG}--gene_sets{RESET} hallmark.gmt {fg.CYAN_FG}--seed{RESET} 7 {fg.CYAN_FG}-O{RESET} run{RESET}
    {fg.LWHITE_FG}Evaluation{RESET}:
        {fg.GREEN_FG}cellscribe{fg.CYAN_FG} evaluate{fg.YELLOW_FG} pred.jsonl {fg.CYAN_FG}--references{RESET} ref.jsonl {fg.CYAN_FG}--task{RESET} generation {fg.CYAN_FG}--embeddings{RESET} RBT=rbt.jsonl {fg.CYAN_FG}-O{RESET} eval{RESET}
        {fg.GREEN_FG}cellscribe{fg.CYAN_FG} evaluate{fg.YELLOW_FG} pred.jsonl {fg.CYAN_FG}--references{RESET} cohort.csv {fg.CYAN_FG}--task{RESET} ps {fg.CYAN_FG}--matrix{RESET} sim/similarity.ppr {fg.CYAN_FG}-O{RESET} eval  {fg.DWHITE_FG}⤗{RESET}{fg.FWHITE_FG} # PageRank similarity{RESET}
    {fg.LWHITE_FG}Run files{RESET}:
        {fg.GREEN_FG}cellscribe{fg.CYAN_FG} --config{RESET} run.toml {fg.CYAN_FG}pipeline{fg.YELLOW_FG} cohort.csv{RESET}  {fg.DWHITE_FG}⤗{RESET}{fg.FWHITE_FG} # Keys become defaults, flags still win{RESET}
        """
    if action == "print":
        print(doc)
    else:
        return doc
